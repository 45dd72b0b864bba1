use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cosym::almost_contact::{solve_phi, FreeComponents, PhiSolverOptions};
use cosym::dynamics::{directional, gradient_field, hamiltonian_field_generic, integrate, jacobi_bracket, jacobi_bracket_sharp};
use cosym::integrate::{IntegrationOptions, Method, Termination, Trajectory};
use cosym::jacobi_flows::{
    compare_variants, discrepancy_report, integrate_riccati, red_green_decomposition, reference_case, LinearHamiltonianCoefficients,
    Variant,
};
use cosym::manifolds::{xjt_chart, Builtin};
use cosym::suite::{resolve_seed, run_invariant_suite};
use cosym::{ChartPoint, Point64, ScalarField, Structure64};

use crate::config::{load_structure, model_parameters, parse_point, RunConfig};
use crate::error::CliError;
use crate::{Cli, CmdResult, Command, FlowArgs, StructureArgs, TimeArgs};

const DEFAULT_COEFFS: &str = "0,0,0.5,0.2,0.1";

pub fn run(cli: Cli) -> CmdResult {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::ListManifolds { emit, params } => list_manifolds(emit.as_deref(), &table(&cfg, &params)),
        Command::CheckStructure { structure, probes, json } => check_structure(&cfg, &structure, probes, json),
        Command::Reeb { structure, point } => reeb(&cfg, &structure, &point),
        Command::Field { structure, hamiltonian, point } => field(&cfg, &structure, hamiltonian, point),
        Command::Bracket { structure, f, g, point } => bracket(&cfg, &structure, &f, &g, &point),
        Command::Integrate { structure, hamiltonian, point, time, csv, json, sweep } => {
            integrate_cmd(&cfg, &structure, hamiltonian, point, &time, csv, json, sweep.as_deref())
        }
        Command::Compare { variants, flow, point, time, csv } => compare(&cfg, &variants, &flow, &point, &time, csv.as_deref()),
        Command::Riccati { flow, point, time, paper_verbatim } => riccati(&cfg, &flow, point.as_deref(), &time, paper_verbatim),
        Command::PhiSolve { point, free, params, output } => phi_solve(&cfg, &point, &free, &params, output.as_deref()),
        Command::InvariantSuite { json } => invariant_suite(resolve_seed(cli.seed.or(cfg.seed)), json),
    }
}

fn table(cfg: &RunConfig, overrides: &[(String, f64)]) -> BTreeMap<String, f64> {
    let mut t = cfg.parameters.clone();
    t.extend(overrides.iter().cloned());
    t
}

fn structure(cfg: &RunConfig, args: &StructureArgs) -> Result<(Structure64, BTreeMap<String, f64>), CliError> {
    let t = table(cfg, &args.params);
    let source = match (&args.builtin, &args.structure, &cfg.structure) {
        (Some(b), _, _) => b.clone(),
        (None, Some(p), _) => p.display().to_string(),
        (None, None, Some(s)) => s.clone(),
        (None, None, None) => return Err(CliError::input("no structure given (use --builtin, --structure or the config file)")),
    };
    Ok((load_structure(&source, &t)?, t))
}

fn point_on(s: &Structure64, src: &str) -> Result<Point64, CliError> {
    Ok(ChartPoint::new(s.chart().clone(), parse_point(src)?)?)
}

fn expression(s: &Structure64, t: &BTreeMap<String, f64>, what: &str, src: &str) -> Result<ScalarField<f64>, CliError> {
    let mut vars = s.parameters().clone();
    vars.extend(t.iter().map(|(k, v)| (k.clone(), *v)));
    ScalarField::parse(src, s.chart(), &vars).map_err(|e| CliError::in_expression(e, what, src))
}

/// Console rendering: 15 significant digits, entries below `1e-13` of the
/// largest shown as 0. Files and `--json` keep full precision.
fn vector(v: &[f64]) -> String {
    let top = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let parts: Vec<String> = v
        .iter()
        .map(|&x| {
            if x.abs() <= 1e-13 * top {
                return "0".to_string();
            }
            let rounded: f64 = format!("{x:.14e}").parse().unwrap_or(x);
            format!("{rounded}")
        })
        .collect();
    format!("({})", parts.join(", "))
}

fn file_stem(name: &str) -> String {
    name.replace('(', "_").replace(')', "")
}

fn list_manifolds(emit: Option<&Path>, t: &BTreeMap<String, f64>) -> CmdResult {
    let params = model_parameters(t)?;
    if let Some(dir) = emit {
        std::fs::create_dir_all(dir)?;
    }
    for b in Builtin::catalog() {
        println!("{:<26} {}", b.name(), b.description());
        if let Some(dir) = emit {
            let path = dir.join(format!("{}.json", file_stem(&b.name())));
            std::fs::write(&path, b.doc(&params)?.to_json())?;
            println!("{:<26} -> {}", "", path.display());
        }
    }
    Ok(0)
}

fn check_structure(cfg: &RunConfig, args: &StructureArgs, probes: usize, json: bool) -> CmdResult {
    let (s, _) = structure(cfg, args)?;
    let pts = s.chart().probe_points::<f64>(probes.max(1));
    let class = s.classify(&pts)?;
    let at = &pts[0];
    let r = s.reeb(at).ok();
    let volume = s.volume_coefficient(at.values());
    if json {
        let out = serde_json::json!({
            "structure": s.name(),
            "classification": class,
            "probe": at.values(),
            "reeb": r,
            "volume_coefficient": volume,
        });
        println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    } else {
        println!("structure: {}", s.name());
        println!("coordinates: {}", s.chart().coordinates().join(", "));
        for (name, flag) in [("acos", class.acos), ("gtacos", class.gtacos), ("cos", class.cos), ("contact", class.contact), ("tacs", class.tacs)] {
            println!("{name}={flag}");
        }
        if let Some(eps) = class.epsilon {
            println!("tacs epsilon={eps}");
        }
        println!("probe point: {}", vector(at.values()));
        match &r {
            Some(r) => println!("R={}", vector(r)),
            None => println!("R=undefined (singular flat matrix)"),
        }
        println!("volume coefficient={volume}");
        println!("min |volume| over {} probes={}", class.probes, class.min_volume);
    }
    Ok(if class.acos { 0 } else { 1 })
}

fn reeb(cfg: &RunConfig, args: &StructureArgs, point: &str) -> CmdResult {
    let (s, _) = structure(cfg, args)?;
    let at = point_on(&s, point)?;
    println!("R={}", vector(&s.reeb(&at)?));
    Ok(0)
}

fn hamiltonian_and_point(
    cfg: &RunConfig,
    s: &Structure64,
    t: &BTreeMap<String, f64>,
    hamiltonian: Option<String>,
    point: Option<String>,
) -> Result<(ScalarField<f64>, String, Point64), CliError> {
    let src = hamiltonian.or_else(|| cfg.hamiltonian.clone()).ok_or_else(|| CliError::input("no Hamiltonian given"))?;
    let h = expression(s, t, "hamiltonian", &src)?;
    let at = match (point, &cfg.initial_point) {
        (Some(p), _) => point_on(s, &p)?,
        (None, Some(v)) => ChartPoint::new(s.chart().clone(), v.clone())?,
        (None, None) => return Err(CliError::input("no point given")),
    };
    Ok((h, src, at))
}

fn field(cfg: &RunConfig, args: &StructureArgs, hamiltonian: Option<String>, point: Option<String>) -> CmdResult {
    let (s, t) = structure(cfg, args)?;
    let (h, _, at) = hamiltonian_and_point(cfg, &s, &t, hamiltonian, point)?;
    let x = at.values();
    let xh = hamiltonian_field_generic(&s, &h, &at)?;
    let grad = gradient_field(&s, &h, &at)?;
    let r = s.reeb(&at)?;
    println!("coordinates: {}", s.chart().coordinates().join(", "));
    println!("H={}", h.eval(x));
    println!("R(H)={}", directional(&r, &h, x));
    println!("X_H={}", vector(&xh));
    println!("grad H={}", vector(&grad));
    Ok(0)
}

fn bracket(cfg: &RunConfig, args: &StructureArgs, f: &str, g: &str, point: &str) -> CmdResult {
    let (s, t) = structure(cfg, args)?;
    let at = point_on(&s, point)?;
    let ff = expression(&s, &t, "f", f)?;
    let gg = expression(&s, &t, "g", g)?;
    let sharp = jacobi_bracket_sharp(&s, &ff, &gg, &at)?;
    match s.chart().darboux().and_then(|d| d.kappa) {
        Some(_) => println!("{{f,g}}={}", jacobi_bracket(&ff, &gg, &at)?),
        None => println!("{{f,g}}=undefined (no Darboux layout)"),
    }
    println!("{{f,g}}_J={sharp}");
    Ok(0)
}

fn options(cfg: &RunConfig, time: &TimeArgs) -> Result<IntegrationOptions, CliError> {
    let method = match &time.method {
        Some(m) => Method::from_str(m)?,
        None => cfg.method.unwrap_or(Method::AdaptiveRk45),
    };
    let opts = IntegrationOptions::new(time.t_end.or(cfg.t_end).unwrap_or(1.0), time.dt.or(cfg.dt).unwrap_or(0.01), method);
    opts.validate()?;
    Ok(opts)
}

fn suffixed(path: &Path, i: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{i}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{i}"),
    };
    path.with_file_name(name)
}

fn termination_name(t: &Termination) -> String {
    match t {
        Termination::Completed => "completed".into(),
        Termination::DomainEscape { t, message } => format!("domain escape at t={t}: {message}"),
        Termination::StepUnderflow { t, step } => format!("step underflow at t={t} (step {step})"),
        Termination::FieldFailure { t, message } => format!("field failure at t={t}: {message}"),
        Termination::StepLimit { t } => format!("step limit at t={t}"),
    }
}

fn summary(tr: &Trajectory<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "termination: {}", termination_name(&tr.termination));
    let _ = writeln!(out, "rows: {}", tr.len());
    let _ = writeln!(out, "final state: {}", vector(tr.states.last().map(|p| p.values()).unwrap_or(&[])));
    let _ = writeln!(out, "energy drift: {}", tr.energy_drift());
    let _ = writeln!(out, "max dissipation residual: {}", tr.max_dissipation_residual());
    if let Some(y) = tr.min_coordinate("y") {
        let _ = writeln!(out, "min y: {y}");
    }
    out
}

fn write_outputs(tr: &Trajectory<f64>, csv: &Path, json: &Path) -> Result<(), CliError> {
    std::fs::write(csv, tr.to_csv())?;
    std::fs::write(json, serde_json::to_string_pretty(&tr.to_json()).expect("json"))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn integrate_cmd(
    cfg: &RunConfig,
    args: &StructureArgs,
    hamiltonian: Option<String>,
    point: Option<String>,
    time: &TimeArgs,
    csv: Option<PathBuf>,
    json: Option<PathBuf>,
    sweep: Option<&Path>,
) -> CmdResult {
    let (s, t) = structure(cfg, args)?;
    let opts = options(cfg, time)?;
    let csv = csv.or_else(|| cfg.outputs.csv.clone()).unwrap_or_else(|| PathBuf::from("trajectory.csv"));
    let json = json.or_else(|| cfg.outputs.json.clone()).unwrap_or_else(|| PathBuf::from("trajectory.json"));
    let Some(sweep) = sweep else {
        let (h, _, at) = hamiltonian_and_point(cfg, &s, &t, hamiltonian, point)?;
        let tr = integrate(&s, &h, &at, &opts)?;
        write_outputs(&tr, &csv, &json)?;
        print!("{}", summary(&tr));
        println!("wrote {} and {}", csv.display(), json.display());
        return Ok(if tr.termination.is_complete() { 0 } else { 1 });
    };
    let src = std::fs::read_to_string(sweep).map_err(|e| CliError::input(format!("{}: {e}", sweep.display())))?;
    let starts: Vec<Vec<f64>> = serde_json::from_str(&src)
        .map_err(|e| CliError::input(format!("{}: line {}, column {}: {e}", sweep.display(), e.line(), e.column())))?;
    let first = starts.first().map(|v| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
    let (h, _, _) = hamiltonian_and_point(cfg, &s, &t, hamiltonian, first.or(point))?;
    let points = starts
        .into_iter()
        .map(|v| ChartPoint::new(s.chart().clone(), v).map_err(CliError::from))
        .collect::<Result<Vec<_>, _>>()?;
    let results: Vec<Result<Trajectory<f64>, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = points
            .iter()
            .map(|at| scope.spawn(|| integrate(&s, &h, at, &opts).map_err(CliError::from)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut code = 0;
    for (i, r) in results.into_iter().enumerate() {
        let tr = r?;
        let (c, j) = (suffixed(&csv, i), suffixed(&json, i));
        write_outputs(&tr, &c, &j)?;
        println!("run {i}:");
        print!("{}", summary(&tr));
        println!("wrote {} and {}", c.display(), j.display());
        if !tr.termination.is_complete() {
            code = 1;
        }
    }
    Ok(code)
}

fn coefficients(flow: &FlowArgs, fallback: &str) -> Result<LinearHamiltonianCoefficients, CliError> {
    let src = flow.coeffs.as_deref().unwrap_or(fallback);
    let v = parse_point(src)?;
    let [a, b, c, m, n] = v[..] else {
        return Err(CliError::input(format!("--coeffs needs five numbers a,b,c,m,n, got {}", v.len())));
    };
    let mut coeffs = LinearHamiltonianCoefficients::new(a, b, c, m, n);
    if let Some(h) = &flow.h_kappa {
        coeffs = coeffs.with_h_kappa(h.clone());
        coeffs.h_kappa_field().map_err(|e| CliError::in_expression(e, "h_kappa", h))?;
    }
    coeffs.validate()?;
    Ok(coeffs)
}

fn compare(cfg: &RunConfig, variants: &str, flow: &FlowArgs, point: &str, time: &TimeArgs, csv: Option<&Path>) -> CmdResult {
    let list = variants.split(',').map(|v| Variant::from_str(v.trim())).collect::<Result<Vec<_>, _>>()?;
    if list.len() < 2 {
        return Err(CliError::input("compare needs at least two variants"));
    }
    let coeffs = coefficients(flow, DEFAULT_COEFFS)?;
    let params = model_parameters(&table(cfg, &flow.params))?;
    let x0 = parse_point(point)?;
    if x0.len() != 5 {
        return Err(CliError::input("--point needs x,y,q,p,kappa"));
    }
    let at = ChartPoint::new(xjt_chart(), x0.clone())?;
    let opts = options(cfg, time)?;
    let mut csv_out = String::new();
    for other in &list[1..] {
        let d = compare_variants(&coeffs, &params, list[0], *other, &x0, &opts)?;
        println!("{} - {}: max delta on (x,y,q,p) = {}", list[0].name(), other.name(), d.max_delta);
        println!("{:>8} {:>24} {:>24} {:>24} {:>24}", "t", "dx", "dy", "dq", "dp");
        for (t, row) in d.times.iter().zip(&d.deltas) {
            println!("{t:>8.4} {:>24.16e} {:>24.16e} {:>24.16e} {:>24.16e}", row[0], row[1], row[2], row[3]);
            let _ = writeln!(csv_out, "{},{},{},{},{},{},{}", list[0].name(), other.name(), t, row[0], row[1], row[2], row[3]);
        }
    }
    for v in list.iter().filter(|v| **v != Variant::BaseXj1) {
        let rg = red_green_decomposition(&coeffs, &params, *v, &at)?;
        let active = rg.active(1e-12);
        println!(
            "{} correction at the initial point: {} (active: {})",
            v.name(),
            vector(&rg.correction),
            if active.is_empty() { "none".to_string() } else { active.join(", ") }
        );
    }
    if let Some(path) = csv {
        std::fs::write(path, format!("first,second,t,dx,dy,dq,dp\n{csv_out}"))?;
    }
    Ok(0)
}

fn riccati(cfg: &RunConfig, flow: &FlowArgs, point: Option<&str>, time: &TimeArgs, paper_verbatim: bool) -> CmdResult {
    if paper_verbatim {
        let (ref_coeffs, ref_params, ref_x) = reference_case();
        let coeffs = if flow.coeffs.is_some() || flow.h_kappa.is_some() { coefficients(flow, DEFAULT_COEFFS)? } else { ref_coeffs };
        let overrides = table(cfg, &flow.params);
        let params = if overrides.is_empty() { ref_params } else { model_parameters(&overrides)? };
        let x: [f64; 5] = match point {
            Some(p) => parse_point(p)?.try_into().map_err(|_| CliError::input("--point needs x,y,q,p,kappa with --paper-verbatim"))?,
            None => ref_x,
        };
        println!("point (x,y,q,p,kappa) = {}", vector(&x));
        println!("{:<48} {:>24} {:>24} {:>12}", "equation", "printed", "derived", "residual");
        for row in discrepancy_report(&coeffs, &params, &x)? {
            println!("{:<48} {:>24.16e} {:>24.16e} {:>12.3e}", row.equation, row.printed, row.derived, row.residual);
        }
        return Ok(0);
    }
    let coeffs = coefficients(flow, DEFAULT_COEFFS)?;
    let x0 = parse_point(point.unwrap_or("0.5,1.5"))?;
    let [x, y] = x0[..] else { return Err(CliError::input("--point needs x,y")) };
    let path = integrate_riccati(&coeffs, [x, y], &options(cfg, time)?)?;
    println!("t,x,y");
    for (t, p) in path.times.iter().zip(&path.states) {
        println!("{},{},{}", t, p.values()[0], p.values()[1]);
    }
    if !path.termination.is_complete() {
        eprintln!("stopped early: {}", termination_name(&path.termination));
        return Ok(1);
    }
    Ok(0)
}

fn phi_solve(cfg: &RunConfig, point: &str, free: &str, params: &[(String, f64)], output: Option<&Path>) -> CmdResult {
    let p = model_parameters(&table(cfg, params))?;
    let at = ChartPoint::new(xjt_chart(), parse_point(point)?)?;
    let f = parse_point(free)?;
    let [yq, yp, qp, pq] = f[..] else { return Err(CliError::input("--free needs four numbers yq,yp,qp,pq")) };
    let sol = solve_phi(FreeComponents::new(yq, yp, qp, pq), &p, &at, &PhiSolverOptions::default())?;
    let text = serde_json::to_string_pretty(&sol).expect("json");
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(0)
}

fn invariant_suite(seed: u64, json: bool) -> CmdResult {
    let report = run_invariant_suite(seed)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    } else {
        println!("seed: {seed}");
        for c in &report.checks {
            println!(
                "{} {:<40} {:>11.3e} (tol {:.0e}) {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.tolerance,
                c.detail
            );
        }
    }
    Ok(if report.passed() { 0 } else { 1 })
}
