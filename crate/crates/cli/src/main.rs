//! `cosym`: batch front end for the cosym library.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::parse_assignment;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "cosym", version, about = "Hamiltonian dynamics on almost cosymplectic and contact charts")]
pub struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for randomized checks (COSYM_SEED takes precedence; default 42).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

/// Which structure to load.
#[derive(Debug, Clone, Args)]
pub struct StructureArgs {
    /// Builtin structure, e.g. `xjt_gtacos` or `darboux_contact(2)`.
    #[arg(long, conflicts_with = "structure")]
    pub builtin: Option<String>,
    /// Structure document (JSON).
    #[arg(long)]
    pub structure: Option<PathBuf>,
    /// Parameter assignment `name=value`, repeatable (k, nu, delta, ...).
    #[arg(long = "param", value_parser = parse_assignment)]
    pub params: Vec<(String, f64)>,
}

/// Coefficients of the linear Hamiltonian on the extended half-plane.
#[derive(Debug, Clone, Args)]
pub struct FlowArgs {
    /// `a,b,c,m,n` (default 0,0,0.5,0.2,0.1).
    #[arg(long)]
    pub coeffs: Option<String>,
    /// κ-dependent term of the energy (default 0).
    #[arg(long)]
    pub h_kappa: Option<String>,
    /// Parameter assignment `name=value` for k, nu, delta.
    #[arg(long = "param", value_parser = parse_assignment)]
    pub params: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Args)]
pub struct TimeArgs {
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// `rk4` or `rk45`.
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List builtin structures.
    ListManifolds {
        /// Write one structure document per builtin into this directory.
        #[arg(long)]
        emit: Option<PathBuf>,
        #[arg(long = "param", value_parser = parse_assignment)]
        params: Vec<(String, f64)>,
    },
    /// Classify a structure; exits 0 iff it is almost cosymplectic at all probes.
    CheckStructure {
        #[command(flatten)]
        structure: StructureArgs,
        #[arg(long, default_value_t = 32)]
        probes: usize,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Reeb vector at a point.
    Reeb {
        #[command(flatten)]
        structure: StructureArgs,
        #[arg(long)]
        point: String,
    },
    /// Hamiltonian field and gradient of H at a point.
    Field {
        #[command(flatten)]
        structure: StructureArgs,
        #[arg(long)]
        hamiltonian: Option<String>,
        #[arg(long)]
        point: Option<String>,
    },
    /// Jacobi bracket of two functions at a point.
    Bracket {
        #[command(flatten)]
        structure: StructureArgs,
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        #[arg(long)]
        point: String,
    },
    /// Integrate the Hamiltonian flow and write CSV/JSON trajectories.
    Integrate {
        #[command(flatten)]
        structure: StructureArgs,
        #[arg(long)]
        hamiltonian: Option<String>,
        #[arg(long)]
        point: Option<String>,
        #[command(flatten)]
        time: TimeArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        /// JSON array of initial points run in parallel; outputs get an
        /// `_<index>` suffix.
        #[arg(long)]
        sweep: Option<PathBuf>,
    },
    /// Compare equations of motion of two or more variants.
    Compare {
        /// Comma-separated subset of base_xj1, gtacos, contact.
        #[arg(long, default_value = "gtacos,base_xj1")]
        variants: String,
        #[command(flatten)]
        flow: FlowArgs,
        /// `x,y,q,p,kappa`.
        #[arg(long, default_value = "0.5,1.5,0.3,-0.4,0")]
        point: String,
        #[command(flatten)]
        time: TimeArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Riccati flow on the upper half-plane.
    Riccati {
        #[command(flatten)]
        flow: FlowArgs,
        /// `x,y`, or `x,y,q,p,kappa` with --paper-verbatim.
        #[arg(long)]
        point: Option<String>,
        #[command(flatten)]
        time: TimeArgs,
        /// Evaluate the printed right-hand sides next to the derived ones.
        #[arg(long)]
        paper_verbatim: bool,
    },
    /// Solve for Φ of an almost contact metric structure.
    PhiSolve {
        /// `x,y,q,p,kappa`.
        #[arg(long, default_value = "0.3,1.2,0.4,-0.5,0")]
        point: String,
        /// `Φ_yq,Φ_yp,Φ_qp,Φ_pq`.
        #[arg(long, default_value = "0.7,-0.4,0.9,1.3")]
        free: String,
        #[arg(long = "param", value_parser = parse_assignment)]
        params: Vec<(String, f64)>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Seeded invariant checks; exits 1 if any fails.
    InvariantSuite {
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub type CmdResult = Result<u8, CliError>;
