use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cosym::integrate::Method;
use cosym::manifolds::{Builtin, ModelParameters};
use cosym::{Structure64, StructureDoc};
use serde::Deserialize;

use crate::error::CliError;

/// Output paths of a run.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

/// Settings read from `--config`; command-line flags override them.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Builtin name or path to a structure document.
    pub structure: Option<String>,
    pub hamiltonian: Option<String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    pub initial_point: Option<Vec<f64>>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub method: Option<Method>,
    #[serde(default)]
    pub outputs: Outputs,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let src = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&src).map_err(|e| {
            CliError::input(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()))
        })
    }
}

/// `k`, `nu`, `delta` from a parameter table, defaulting to 1.
pub fn model_parameters(table: &BTreeMap<String, f64>) -> Result<ModelParameters, CliError> {
    let get = |name: &str| table.get(name).copied().unwrap_or(1.0);
    let p = ModelParameters::new(get("k"), get("nu"), get("delta"));
    p.validate()?;
    Ok(p)
}

/// A builtin name or the path of a structure document.
pub fn load_structure(source: &str, table: &BTreeMap<String, f64>) -> Result<Structure64, CliError> {
    if let Ok(b) = Builtin::from_str(source) {
        return Ok(b.build(&model_parameters(table)?)?);
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(CliError::input(format!("`{source}` is neither a builtin structure nor a readable file")));
    }
    let src = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{source}: {e}")))?;
    let mut doc: StructureDoc = serde_json::from_str(&src)
        .map_err(|e| CliError::input(format!("{source}: line {}, column {}: {e}", e.line(), e.column())))?;
    for (k, v) in table {
        doc.parameters.insert(k.clone(), *v);
    }
    Ok(Structure64::from_doc(&doc)?)
}

/// Comma-separated reals.
pub fn parse_point(src: &str) -> Result<Vec<f64>, CliError> {
    src.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::input(format!("bad number `{}` in `{src}`: {e}", s.trim()))))
        .collect()
}

/// `name=value` pairs.
pub fn parse_assignment(src: &str) -> Result<(String, f64), String> {
    let (k, v) = src.split_once('=').ok_or_else(|| format!("expected name=value, got `{src}`"))?;
    let v = v.trim().parse::<f64>().map_err(|e| format!("bad value in `{src}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}
