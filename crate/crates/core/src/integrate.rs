//! Explicit Runge–Kutta integration with domain-guard monitoring.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chart::{Chart, ChartPoint};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk4,
    #[serde(alias = "rk45")]
    AdaptiveRk45,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Method> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "rk45" | "adaptive-rk45" => Ok(Method::AdaptiveRk45),
            other => Err(Error::Input(format!("unknown method `{other}` (expected rk4 or rk45)"))),
        }
    }
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rk4 => "rk4",
            Method::AdaptiveRk45 => "adaptive-rk45",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    pub t_end: f64,
    /// Recording interval; also the fixed step for RK4.
    pub dt: f64,
    pub method: Method,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl IntegrationOptions {
    pub fn new(t_end: f64, dt: f64, method: Method) -> Self {
        IntegrationOptions { t_end, dt, method, abs_tol: 1e-9, rel_tol: 1e-9, max_steps: 10_000_000 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Input(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Input(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol >= 0.0) {
            return Err(Error::Input("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// Recording times `0, dt, 2dt, …, t_end`.
    pub fn grid(&self) -> Vec<f64> {
        let steps = ((self.t_end / self.dt) - 1e-9).ceil().max(0.0) as usize;
        let mut g: Vec<f64> = (0..=steps).map(|k| (k as f64 * self.dt).min(self.t_end)).collect();
        g.dedup();
        g
    }
}

/// How an integration run ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    DomainEscape { t: f64, message: String },
    StepUnderflow { t: f64, step: f64 },
    FieldFailure { t: f64, message: String },
    StepLimit { t: f64 },
}

impl Termination {
    pub fn is_complete(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

/// Recorded states on the output grid.
#[derive(Debug, Clone)]
pub struct Path<T> {
    pub times: Vec<T>,
    pub states: Vec<ChartPoint<T>>,
    pub termination: Termination,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Integrates `ẋ = f(x)` from `x0`, recording on `opts.grid()`. The run
/// stops early, keeping what was recorded, when a state leaves the chart
/// domain or the field fails.
pub fn integrate_field<T, F>(chart: &Arc<Chart>, field: F, x0: &ChartPoint<T>, opts: &IntegrationOptions) -> Result<Path<T>>
where
    T: Real,
    F: Fn(&[T]) -> Result<Vec<T>>,
{
    opts.validate()?;
    x0.require_chart(chart)?;
    let grid = opts.grid();
    let mut path = Path {
        times: vec![T::lit(grid[0])],
        states: vec![x0.clone()],
        termination: Termination::Completed,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let mut x = x0.values().to_vec();
    let mut h = T::lit(opts.dt);
    for w in grid.windows(2) {
        let (t0, t1) = (T::lit(w[0]), T::lit(w[1]));
        let res = match opts.method {
            Method::Rk4 => rk4_step(chart, &field, &x, t1 - t0, w[0]).map(|y| {
                path.accepted_steps += 1;
                y
            }),
            Method::AdaptiveRk45 => rk45_segment(chart, &field, &x, t0, t1, &mut h, opts, &mut path),
        };
        match res {
            Ok(y) => match ChartPoint::new(chart.clone(), y.clone()) {
                Ok(p) => {
                    x = y;
                    path.times.push(t1);
                    path.states.push(p);
                }
                Err(e) => {
                    path.termination = Termination::DomainEscape { t: w[1], message: e.to_string() };
                    break;
                }
            },
            Err(stop) => {
                path.termination = stop;
                break;
            }
        }
    }
    Ok(path)
}

fn eval_field<T: Real, F>(chart: &Chart, field: &F, x: &[T], t: f64) -> std::result::Result<Vec<T>, Termination>
where
    F: Fn(&[T]) -> Result<Vec<T>>,
{
    if let Err(e) = chart.check(x) {
        return Err(Termination::DomainEscape { t, message: e.to_string() });
    }
    match field(x) {
        Ok(v) if v.iter().all(|c| c.as_f64().is_finite()) => Ok(v),
        Ok(_) => Err(Termination::FieldFailure { t, message: "non-finite velocity".into() }),
        Err(e) => Err(Termination::FieldFailure { t, message: e.to_string() }),
    }
}

fn axpy<T: Real>(x: &[T], terms: &[(T, &[T])]) -> Vec<T> {
    let mut out = x.to_vec();
    for (c, v) in terms {
        for (o, vi) in out.iter_mut().zip(v.iter()) {
            *o += *c * *vi;
        }
    }
    out
}

fn rk4_step<T: Real, F>(chart: &Chart, f: &F, x: &[T], h: T, t: f64) -> std::result::Result<Vec<T>, Termination>
where
    F: Fn(&[T]) -> Result<Vec<T>>,
{
    let half = h / T::lit(2.0);
    let k1 = eval_field(chart, f, x, t)?;
    let k2 = eval_field(chart, f, &axpy(x, &[(half, &k1)]), t)?;
    let k3 = eval_field(chart, f, &axpy(x, &[(half, &k2)]), t)?;
    let k4 = eval_field(chart, f, &axpy(x, &[(h, &k3)]), t)?;
    let s = h / T::lit(6.0);
    Ok(axpy(x, &[(s, &k1), (s * T::lit(2.0), &k2), (s * T::lit(2.0), &k3), (s, &k4)]))
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One trial step; `Err` carries the stage failure.
fn dp_trial<T: Real, F>(chart: &Chart, f: &F, x: &[T], h: T, t: f64) -> std::result::Result<(Vec<T>, Vec<T>), Termination>
where
    F: Fn(&[T]) -> Result<Vec<T>>,
{
    let mut k: Vec<Vec<T>> = Vec::with_capacity(7);
    for s in 0..7 {
        let terms: Vec<(T, &[T])> = (0..s).map(|j| (h * T::lit(A[s][j]), k[j].as_slice())).collect();
        let xs = axpy(x, &terms);
        k.push(eval_field(chart, f, &xs, t)?);
    }
    let y5 = axpy(x, &(0..7).map(|j| (h * T::lit(B5[j]), k[j].as_slice())).collect::<Vec<_>>());
    let err: Vec<T> = (0..x.len())
        .map(|i| (0..7).fold(T::zero(), |acc, j| acc + h * T::lit(B5[j] - B4[j]) * k[j][i]))
        .collect();
    Ok((y5, err))
}

#[allow(clippy::too_many_arguments)]
fn rk45_segment<T: Real, F>(
    chart: &Chart,
    f: &F,
    x: &[T],
    t0: T,
    t1: T,
    h: &mut T,
    opts: &IntegrationOptions,
    path: &mut Path<T>,
) -> std::result::Result<Vec<T>, Termination>
where
    F: Fn(&[T]) -> Result<Vec<T>>,
{
    let mut t = t0;
    let mut y = x.to_vec();
    let abs = T::lit(opts.abs_tol);
    let rel = T::lit(opts.rel_tol);
    let mut last_failure: Option<Termination> = None;
    while t < t1 {
        if path.accepted_steps + path.rejected_steps >= opts.max_steps {
            return Err(Termination::StepLimit { t: t.as_f64() });
        }
        let remaining = t1 - t;
        let clipped = *h >= remaining;
        let step = if clipped { remaining } else { *h };
        let floor = T::machine_eps() * T::lit(16.0) * t.abs().max(T::one());
        if step < floor {
            return Err(last_failure
                .filter(|f| matches!(f, Termination::DomainEscape { .. }))
                .unwrap_or(Termination::StepUnderflow { t: t.as_f64(), step: step.as_f64() }));
        }
        match dp_trial(chart, f, &y, step, t.as_f64()) {
            Ok((y5, err)) => {
                let norm = err.iter().zip(y.iter().zip(&y5)).fold(T::zero(), |m, (e, (a, b))| {
                    let sc = abs + rel * a.abs().max(b.abs());
                    m.max(e.abs() / sc)
                });
                if norm <= T::one() && chart.contains(&y5) {
                    t = if clipped { t1 } else { t + step };
                    // Rounding can leave an unresolvable sliver before `t1`.
                    if t1 - t <= floor {
                        t = t1;
                    }
                    y = y5;
                    path.accepted_steps += 1;
                    let grow = if norm == T::zero() {
                        T::lit(5.0)
                    } else {
                        (T::lit(0.9) * norm.powf(T::lit(-0.2))).min(T::lit(5.0))
                    };
                    if !clipped {
                        *h = step * grow.max(T::one());
                    }
                    last_failure = None;
                } else {
                    path.rejected_steps += 1;
                    let shrink = if norm > T::one() {
                        (T::lit(0.9) * norm.powf(T::lit(-0.2))).max(T::lit(0.2))
                    } else {
                        T::lit(0.5)
                    };
                    if norm <= T::one() {
                        last_failure = Some(Termination::DomainEscape {
                            t: t.as_f64(),
                            message: "step would leave the chart domain".into(),
                        });
                    }
                    *h = step * shrink;
                }
            }
            Err(stop @ Termination::DomainEscape { .. }) => {
                path.rejected_steps += 1;
                last_failure = Some(stop);
                *h = step * T::lit(0.5);
            }
            Err(other) => return Err(other),
        }
    }
    Ok(y)
}

/// Run metadata written alongside trajectory data.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub structure: String,
    pub parameters: BTreeMap<String, f64>,
    pub hamiltonian: String,
    pub method: Method,
    pub dt: f64,
    pub t_end: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

/// An integrated trajectory with energy monitoring.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub coordinates: Vec<String>,
    pub times: Vec<T>,
    pub states: Vec<ChartPoint<T>>,
    pub hamiltonian_values: Vec<T>,
    /// `|dH/dt + H R(H)|`, with `dH/dt` from finite differences of the
    /// recorded `H` samples: centered inside, second-order one-sided at the
    /// ends, NaN for a single sample.
    pub dissipation_residuals: Vec<T>,
    pub termination: Termination,
    pub metadata: RunMetadata,
}

/// `dH/dt` estimates on a possibly nonuniform grid.
pub fn sample_derivative<T: Real>(t: &[T], h: &[T]) -> Vec<T> {
    let n = t.len();
    match n {
        0 => vec![],
        1 => vec![T::lit(f64::NAN)],
        2 => {
            let d = (h[1] - h[0]) / (t[1] - t[0]);
            vec![d, d]
        }
        _ => (0..n)
            .map(|i| {
                let (a, b, c) = if i == 0 {
                    (0, 1, 2)
                } else if i == n - 1 {
                    (n - 3, n - 2, n - 1)
                } else {
                    (i - 1, i, i + 1)
                };
                lagrange_slope(&[t[a], t[b], t[c]], &[h[a], h[b], h[c]], t[i])
            })
            .collect(),
    }
}

fn lagrange_slope<T: Real>(t: &[T; 3], h: &[T; 3], at: T) -> T {
    let mut s = T::zero();
    for j in 0..3 {
        let mut denom = T::one();
        let mut numer = T::zero();
        for m in 0..3 {
            if m != j {
                denom *= t[j] - t[m];
                let mut prod = T::one();
                for l in 0..3 {
                    if l != j && l != m {
                        prod *= at - t[l];
                    }
                }
                numer += prod;
            }
        }
        s += h[j] * numer / denom;
    }
    s
}

impl<T: Real> Trajectory<T> {
    pub fn from_path(
        coordinates: Vec<String>,
        path: Path<T>,
        hamiltonian_values: Vec<T>,
        h_times_rh: Vec<T>,
        metadata: RunMetadata,
    ) -> Self {
        let hdot = sample_derivative(&path.times, &hamiltonian_values);
        let dissipation_residuals = hdot.iter().zip(&h_times_rh).map(|(&d, &r)| (d + r).abs()).collect();
        Trajectory {
            coordinates,
            times: path.times,
            states: path.states,
            hamiltonian_values,
            dissipation_residuals,
            termination: path.termination,
            metadata,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_dissipation_residual(&self) -> f64 {
        self.dissipation_residuals.iter().map(|v| v.as_f64()).filter(|v| v.is_finite()).fold(0.0, f64::max)
    }

    pub fn energy_drift(&self) -> f64 {
        let h0 = self.hamiltonian_values[0].as_f64();
        self.hamiltonian_values.iter().fold(0.0, |m, h| m.max((h.as_f64() - h0).abs()))
    }

    /// Minimum of coordinate `name` along the run.
    pub fn min_coordinate(&self, name: &str) -> Option<f64> {
        let i = self.coordinates.iter().position(|c| c == name)?;
        Some(self.states.iter().map(|s| s.values()[i].as_f64()).fold(f64::INFINITY, f64::min))
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.coordinates.iter().position(|c| c == name)?;
        Some(self.states.iter().map(|s| s.values()[i].as_f64()).collect())
    }

    /// `t,<coords>,H,dissipation_residual` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("t,");
        out.push_str(&self.coordinates.join(","));
        out.push_str(",H,dissipation_residual\n");
        for k in 0..self.len() {
            let mut row = vec![fmt17(self.times[k].as_f64())];
            row.extend(self.states[k].values().iter().map(|v| fmt17(v.as_f64())));
            row.push(fmt17(self.hamiltonian_values[k].as_f64()));
            row.push(fmt17(self.dissipation_residuals[k].as_f64()));
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = (0..self.len())
            .map(|k| {
                serde_json::json!({
                    "t": self.times[k].as_f64(),
                    "state": self.states[k].values().iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
                    "H": self.hamiltonian_values[k].as_f64(),
                    "dissipation_residual": finite_or_null(self.dissipation_residuals[k].as_f64()),
                })
            })
            .collect();
        serde_json::json!({
            "metadata": self.metadata,
            "coordinates": self.coordinates,
            "termination": self.termination,
            "rows": rows,
        })
    }
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::Value::Null
    }
}

/// 17 significant digits in scientific notation.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Arc<Chart> {
        Arc::new(Chart::new("line", &["u", "v"]).with_lower("v", 0.0, true).unwrap())
    }

    #[test]
    fn grid_includes_end() {
        let o = IntegrationOptions::new(1.0, 0.3, Method::Rk4);
        assert_eq!(o.grid(), vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        assert_eq!(IntegrationOptions::new(0.0, 0.1, Method::Rk4).grid(), vec![0.0]);
        assert_eq!(IntegrationOptions::new(1.0, 0.1, Method::Rk4).grid().len(), 11);
    }

    #[test]
    fn exponential_decay_both_methods() {
        let c = line();
        let x0 = ChartPoint::from_f64(c.clone(), &[1.0, 1.0]).unwrap();
        for m in [Method::Rk4, Method::AdaptiveRk45] {
            let o = IntegrationOptions::new(1.0, 1e-2, m);
            let p = integrate_field(&c, |x: &[f64]| Ok(vec![x[1], -x[1]]), &x0, &o).unwrap();
            assert!(p.termination.is_complete());
            let v = p.states.last().unwrap().values()[1];
            assert!((v - (-1.0f64).exp()).abs() < 1e-9, "{m:?}: {v}");
        }
    }

    #[test]
    fn domain_escape_keeps_partial_path() {
        let c = line();
        let x0 = ChartPoint::from_f64(c.clone(), &[0.0, 1.0]).unwrap();
        for m in [Method::Rk4, Method::AdaptiveRk45] {
            let o = IntegrationOptions::new(2.0, 0.1, m);
            let p = integrate_field(&c, |_: &[f64]| Ok(vec![0.0, -1.0]), &x0, &o).unwrap();
            assert!(matches!(p.termination, Termination::DomainEscape { .. }), "{m:?}: {:?}", p.termination);
            assert!(p.states.len() >= 9 && p.states.len() <= 11);
            assert!(p.states.iter().all(|s| s.values()[1] > 0.0));
        }
    }

    #[test]
    fn sample_derivative_exact_for_quadratics() {
        let t: Vec<f64> = vec![0.0, 0.1, 0.25, 0.3, 0.7];
        let h: Vec<f64> = t.iter().map(|s| 3.0 * s * s - s + 2.0).collect();
        for (ti, d) in t.iter().zip(sample_derivative(&t, &h)) {
            assert!((d - (6.0 * ti - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_has_17_significant_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
