//! Hamiltonians linear in the Jacobi-group generators on the extended
//! half-plane: energy, equations of motion for each structure, the Riccati
//! flow, and comparisons against the printed forms.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::chart::{Chart, ChartPoint};
use crate::dynamics::{field_source, hamiltonian_field_raw, integrate_monitored, jacobi_bracket_sharp};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::integrate::{integrate_field, IntegrationOptions, Path, RunMetadata, Trajectory};
use crate::manifolds::{xjt_chart, Builtin, ModelParameters};
use crate::structures::StructureSpec;

const X: usize = 0;
const Y: usize = 1;
const Q: usize = 2;
const P: usize = 3;
const K: usize = 4;

/// `ε_a = a + ib`, `ε₀ = 2c_lin`, `ε₊ = m − i n_lin`, plus `h(κ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHamiltonianCoefficients {
    pub a: f64,
    pub b: f64,
    pub c_lin: f64,
    pub m: f64,
    pub n_lin: f64,
    /// Expression in `kappa`.
    #[serde(default = "zero_source")]
    pub h_kappa: String,
}

fn zero_source() -> String {
    "0".into()
}

impl Default for LinearHamiltonianCoefficients {
    fn default() -> Self {
        LinearHamiltonianCoefficients { a: 0.0, b: 0.0, c_lin: 0.0, m: 0.0, n_lin: 0.0, h_kappa: zero_source() }
    }
}

impl LinearHamiltonianCoefficients {
    pub fn new(a: f64, b: f64, c_lin: f64, m: f64, n_lin: f64) -> Self {
        LinearHamiltonianCoefficients { a, b, c_lin, m, n_lin, h_kappa: zero_source() }
    }

    pub fn with_h_kappa(mut self, src: impl Into<String>) -> Self {
        self.h_kappa = src.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (n, v) in [("a", self.a), ("b", self.b), ("c", self.c_lin), ("m", self.m), ("n", self.n_lin)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameters(format!("coefficient {n} is not finite")));
            }
        }
        Ok(())
    }

    fn table(&self, params: &ModelParameters) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("a".into(), self.a),
            ("b".into(), self.b),
            ("c".into(), self.c_lin),
            ("m".into(), self.m),
            ("n".into(), self.n_lin),
            ("k".into(), params.k),
            ("nu".into(), params.nu),
            ("delta".into(), params.delta),
        ])
    }

    /// `h(κ)` over the `(x, y, q, p, κ)` chart; rejects other coordinates.
    pub fn h_kappa_field(&self) -> Result<ScalarField<f64>> {
        let chart = xjt_chart();
        let h = ScalarField::parse(&self.h_kappa, &chart, &BTreeMap::new())?;
        for i in 0..4 {
            if !h.partial(i).is_zero() {
                return Err(Error::Input(format!(
                    "h_kappa must depend on kappa only, found `{}`",
                    chart.coordinates()[i]
                )));
            }
        }
        Ok(h)
    }
}

/// `H = H(q,p) + H(x,y) + h(κ)` as separate fields over `(x, y, q, p, κ)`.
#[derive(Debug, Clone)]
pub struct SplitEnergy {
    pub h_pq: ScalarField<f64>,
    pub h_xy: ScalarField<f64>,
    pub h_kappa: ScalarField<f64>,
}

impl SplitEnergy {
    pub fn new(coeffs: &LinearHamiltonianCoefficients, params: &ModelParameters) -> Result<Self> {
        coeffs.validate()?;
        let chart = xjt_chart();
        let t = coeffs.table(params);
        Ok(SplitEnergy {
            h_pq: ScalarField::parse("nu*((m+c)*q^2 + (c-m)*p^2 + 2*n*q*p + 2*(a*q + b*p))", &chart, &t)?,
            h_xy: ScalarField::parse("k*((1/y)*((m+c)*(x^2+y^2) - 2*(n*x + c*y)) + 3*c - m)", &chart, &t)?,
            h_kappa: coeffs.h_kappa_field()?,
        })
    }

    pub fn total(&self) -> ScalarField<f64> {
        self.h_pq.clone() + self.h_xy.clone() + self.h_kappa.clone()
    }
}

/// `H(q,p) + H(x,y)` by direct arithmetic.
pub fn energy(coeffs: &LinearHamiltonianCoefficients, params: &ModelParameters, x: f64, y: f64, p: f64, q: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain { chart: "xj1".into(), guard: "y > 0".into(), value: y });
    }
    let LinearHamiltonianCoefficients { a, b, c_lin: c, m, n_lin: n, .. } = *coeffs;
    let hpq = params.nu * ((m + c) * q * q + (c - m) * p * p + 2.0 * n * q * p + 2.0 * (a * q + b * p));
    let hxy = params.k * ((1.0 / y) * ((m + c) * (x * x + y * y) - 2.0 * (n * x + c * y)) + 3.0 * c - m);
    Ok(hpq + hxy)
}

/// Which equations of motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Symplectic flow on `(x, y, q, p)`.
    BaseXj1,
    Gtacos,
    Contact,
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Variant> {
        match s {
            "base_xj1" => Ok(Variant::BaseXj1),
            "gtacos" => Ok(Variant::Gtacos),
            "contact" => Ok(Variant::Contact),
            _ => Err(Error::Input(format!("unknown variant `{s}` (expected base_xj1, gtacos, contact)"))),
        }
    }
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::BaseXj1 => "base_xj1",
            Variant::Gtacos => "gtacos",
            Variant::Contact => "contact",
        }
    }

    pub fn structure(self, params: &ModelParameters) -> Result<StructureSpec<f64>> {
        match self {
            Variant::BaseXj1 | Variant::Gtacos => Builtin::XjtGtacos.build(params),
            Variant::Contact => Builtin::XjtContact.build(params),
        }
    }

    /// Number of velocity components.
    pub fn dimension(self) -> usize {
        if self == Variant::BaseXj1 {
            4
        } else {
            5
        }
    }
}

/// Symplectic field of `ω = (k/y²)dx∧dy + 2ν dq∧dp` on `(x, y, q, p)`.
fn base_field(s: &StructureSpec<f64>, h: &ScalarField<f64>, x: &[f64]) -> Result<Vec<f64>> {
    let w = s.omega_matrix(x).view((0, 0), (4, 4)).transpose();
    let dh = h.gradient_at(x);
    let sol = w.lu().solve(&DVector::from_row_slice(&dh[..4])).ok_or(Error::SingularFlat)?;
    Ok(sol.iter().copied().collect())
}

/// Velocity at a `(x, y, q, p, κ)` point; four components for
/// [`Variant::BaseXj1`].
pub fn eom(coeffs: &LinearHamiltonianCoefficients, params: &ModelParameters, variant: Variant, at: &ChartPoint<f64>) -> Result<Vec<f64>> {
    let s = variant.structure(params)?;
    at.require_chart(s.chart())?;
    let h = SplitEnergy::new(coeffs, params)?.total();
    velocity(&s, variant, &h, at.values())
}

fn velocity(s: &StructureSpec<f64>, variant: Variant, h: &ScalarField<f64>, x: &[f64]) -> Result<Vec<f64>> {
    match variant {
        Variant::BaseXj1 => base_field(s, h, x),
        _ => hamiltonian_field_raw(s, h, x),
    }
}

/// `ẋ = (m+c)(y² − x²) + 2nx`, `ẏ = 2y(n − (m+c)x)`.
pub fn riccati_rhs(coeffs: &LinearHamiltonianCoefficients, x: f64, y: f64) -> Result<[f64; 2]> {
    if !(y > 0.0) {
        return Err(Error::Domain { chart: "upper_half_plane".into(), guard: "y > 0".into(), value: y });
    }
    let mc = coeffs.m + coeffs.c_lin;
    Ok([mc * (y * y - x * x) + 2.0 * coeffs.n_lin * x, 2.0 * y * (coeffs.n_lin - mc * x)])
}

/// Chart `(x, y)` with `y > 0`.
pub fn upper_half_plane() -> Arc<Chart> {
    Arc::new(Chart::new("upper_half_plane", &["x", "y"]).with_lower("y", 0.0, true).expect("static chart"))
}

pub fn integrate_riccati(coeffs: &LinearHamiltonianCoefficients, x0: [f64; 2], opts: &IntegrationOptions) -> Result<Path<f64>> {
    let chart = upper_half_plane();
    let start = ChartPoint::new(chart.clone(), x0.to_vec())?;
    integrate_field(&chart, |v: &[f64]| riccati_rhs(coeffs, v[0], v[1]).map(|r| r.to_vec()), &start, opts)
}

/// Integrates a variant from a `(x, y, q, p, κ)` point (the κ entry is
/// ignored for [`Variant::BaseXj1`]).
pub fn integrate_eom(
    coeffs: &LinearHamiltonianCoefficients,
    params: &ModelParameters,
    variant: Variant,
    x0: &[f64],
    opts: &IntegrationOptions,
) -> Result<Trajectory<f64>> {
    let s = variant.structure(params)?;
    let h = SplitEnergy::new(coeffs, params)?.total();
    let metadata = RunMetadata {
        structure: format!("{} ({})", s.name(), variant.name()),
        parameters: coeffs.table(params),
        hamiltonian: field_source(&h, s.chart()),
        method: opts.method,
        dt: opts.dt,
        t_end: opts.t_end,
        abs_tol: opts.abs_tol,
        rel_tol: opts.rel_tol,
    };
    if variant == Variant::BaseXj1 {
        let chart = Arc::new(Chart::new("xj1", &["x", "y", "q", "p"]).with_lower("y", 0.0, true)?);
        let start = ChartPoint::from_f64(chart.clone(), &x0[..4])?;
        let pad = |v: &[f64]| {
            let mut full = v.to_vec();
            full.push(0.0);
            full
        };
        let h4 = {
            let h = h.clone();
            ScalarField::opaque(move |v: &[f64]| h.eval(&pad(v)))
        };
        return integrate_monitored(
            &chart,
            |v: &[f64]| base_field(&s, &h, &pad(v)),
            |_| Ok(vec![0.0; 4]),
            &h4,
            &start,
            opts,
            metadata,
        );
    }
    let start = ChartPoint::from_f64(s.chart().clone(), x0)?;
    integrate_monitored(
        s.chart(),
        |v: &[f64]| hamiltonian_field_raw(&s, &h, v),
        |v: &[f64]| s.reeb_raw(v),
        &h,
        &start,
        opts,
        metadata,
    )
}

/// Split of a velocity into the base symplectic part and the correction
/// carried by the extension.
#[derive(Debug, Clone, Serialize)]
pub struct RedGreen {
    pub variant: Variant,
    /// `(ẋ, ẏ, q̇, ṗ)` of the base flow.
    pub base: Vec<f64>,
    /// `eom(variant) − (base, 0)`.
    pub correction: Vec<f64>,
}

impl RedGreen {
    /// Names of correction components above `tol`.
    pub fn active(&self, tol: f64) -> Vec<&'static str> {
        let names = ["x", "y", "q", "p", "kappa"];
        self.correction.iter().zip(names).filter(|(c, _)| c.abs() > tol).map(|(_, n)| n).collect()
    }
}

pub fn red_green_decomposition(
    coeffs: &LinearHamiltonianCoefficients,
    params: &ModelParameters,
    variant: Variant,
    at: &ChartPoint<f64>,
) -> Result<RedGreen> {
    if variant == Variant::BaseXj1 {
        return Err(Error::Input("decomposition needs the gtacos or contact variant".into()));
    }
    let base = eom(coeffs, params, Variant::BaseXj1, at)?;
    let full = eom(coeffs, params, variant, at)?;
    let mut correction = full.clone();
    for i in 0..4 {
        correction[i] -= base[i];
    }
    Ok(RedGreen { variant, base, correction })
}

/// One printed-versus-derived comparison.
#[derive(Debug, Clone, Serialize)]
pub struct DiscrepancyRow {
    pub equation: String,
    pub printed: f64,
    pub derived: f64,
    pub residual: f64,
}

impl DiscrepancyRow {
    fn new(equation: impl Into<String>, printed: f64, derived: f64) -> Self {
        DiscrepancyRow { equation: equation.into(), printed, derived, residual: (printed - derived).abs() }
    }
}

/// Printed Riccati right-hand side:
/// `ẋ = (c+m)(−x² + y²) + mx − c + m`, `ẏ = −2(c+m)y² + 2ny`.
pub fn riccati_printed(coeffs: &LinearHamiltonianCoefficients, x: f64, y: f64) -> [f64; 2] {
    let (c, m, n) = (coeffs.c_lin, coeffs.m, coeffs.n_lin);
    [(c + m) * (-x * x + y * y) + m * x - c + m, -2.0 * (c + m) * y * y + 2.0 * n * y]
}

/// Printed `(q̇, ṗ, κ̇)` for the linear Hamiltonian; the `κ̇` line is read
/// token by token, including the `q a²` term.
pub fn linear_pqk_printed(coeffs: &LinearHamiltonianCoefficients, params: &ModelParameters, x: &[f64]) -> Result<[f64; 3]> {
    let LinearHamiltonianCoefficients { a, b, c_lin: c, m, n_lin: n, .. } = *coeffs;
    let (q, p) = (x[Q], x[P]);
    let h = coeffs.h_kappa_field()?;
    let hv = h.eval(x);
    let hk = h.partial_at(K, x);
    let nu2 = 2.0 * params.nu;
    Ok([
        -(m + c) * q - n * p - a - q / nu2 * hk,
        q * n + (c - m) * p + b - p / nu2 * hk,
        (c + m) * q * a * a + (m - c) * p * p + (m - n) * p * q + n * q + b * p - hv / params.delta.sqrt(),
    ])
}

/// Printed contact velocity, with both the field's and the motion
/// equations' `κ̇` lines.
pub fn contact_printed(params: &ModelParameters, h: &ScalarField<f64>, x: &[f64]) -> ([f64; 5], f64) {
    let d = |i| h.partial_at(i, x);
    let (k, nu) = (params.k, params.nu);
    let (y, p) = (x[Y], x[P]);
    let hv = h.eval(x);
    let field_kappa = -y * d(Y) + p * d(P) - hv;
    (
        [
            y * y / k * d(Y),
            -y * y / k * d(X) + y * d(K),
            d(P) / (2.0 * nu),
            -(d(Q) / (2.0 * nu) + p * d(K)),
            field_kappa * d(K),
        ],
        field_kappa,
    )
}

/// `κ̇` of the almost cosymplectic flow as printed without `1/√δ`.
pub fn gtacos_kappa_printed(params: &ModelParameters, h: &ScalarField<f64>, x: &[f64]) -> f64 {
    (x[P] * h.partial_at(P, x) + x[Q] * h.partial_at(Q, x)) / (2.0 * params.nu) - h.eval(x)
}

/// Printed bracket on the contact extension: the Poisson part with the
/// `(y² + 1)/y²` factor and the Euler operator `f + y⁻³ f_y − p f_p`.
pub fn contact_bracket_printed(params: &ModelParameters, f: &ScalarField<f64>, g: &ScalarField<f64>, x: &[f64]) -> f64 {
    let (k, nu) = (params.k, params.nu);
    let y = x[Y];
    let fd = |i| f.partial_at(i, x);
    let gd = |i| g.partial_at(i, x);
    let poisson = (1.0 / k) * (y * y + 1.0) / (y * y) * (fd(X) * gd(Y) - gd(X) * fd(Y))
        + (1.0 / (2.0 * nu)) * (fd(Q) * gd(P) - gd(Q) * fd(P) + (fd(Q) * gd(Y) - gd(Q) * fd(Y)) / (y * y));
    let euler = |h: &ScalarField<f64>| h.eval(x) + h.partial_at(Y, x) / (y * y * y) - x[P] * h.partial_at(P, x);
    poisson + euler(f) * gd(K) - euler(g) * fd(K)
}

/// Fixed comparison point used by the discrepancy report.
pub fn reference_case() -> (LinearHamiltonianCoefficients, ModelParameters, [f64; 5]) {
    (
        LinearHamiltonianCoefficients::new(0.3, -0.2, 0.5, 0.4, 0.7).with_h_kappa("kappa^2/2"),
        ModelParameters::new(1.5, 0.8, 2.0),
        [0.5, 1.5, 0.3, -0.4, 0.2],
    )
}

/// Printed forms against the generic solve at one point.
pub fn discrepancy_report(
    coeffs: &LinearHamiltonianCoefficients,
    params: &ModelParameters,
    x: &[f64; 5],
) -> Result<Vec<DiscrepancyRow>> {
    let at = ChartPoint::from_f64(xjt_chart(), x)?;
    let h = SplitEnergy::new(coeffs, params)?.total();
    let g = eom(coeffs, params, Variant::Gtacos, &at)?;
    let c = eom(coeffs, params, Variant::Contact, &at)?;
    let ric = riccati_rhs(coeffs, x[X], x[Y])?;
    let ric_p = riccati_printed(coeffs, x[X], x[Y]);
    let pqk = linear_pqk_printed(coeffs, params, x)?;
    let (cp, field_kappa) = contact_printed(params, &h, x);
    let mut rows = vec![
        DiscrepancyRow::new("riccati x_dot (printed vs oracle)", ric_p[0], ric[0]),
        DiscrepancyRow::new("riccati y_dot (printed vs oracle)", ric_p[1], ric[1]),
        DiscrepancyRow::new("riccati x_dot (oracle vs generic)", ric[0], g[X]),
        DiscrepancyRow::new("riccati y_dot (oracle vs generic)", ric[1], g[Y]),
        DiscrepancyRow::new("linear q_dot", pqk[0], g[Q]),
        DiscrepancyRow::new("linear p_dot", pqk[1], g[P]),
        DiscrepancyRow::new("linear kappa_dot", pqk[2], g[K]),
        DiscrepancyRow::new("gtacos kappa_dot without 1/sqrt(delta)", gtacos_kappa_printed(params, &h, x), g[K]),
    ];
    for (i, name) in ["x", "y", "q", "p"].iter().enumerate() {
        rows.push(DiscrepancyRow::new(format!("contact {name}_dot"), cp[i], c[i]));
    }
    rows.push(DiscrepancyRow::new("contact kappa_dot (equations of motion)", cp[K], c[K]));
    rows.push(DiscrepancyRow::new("contact kappa component (vector field)", field_kappa, c[K]));
    let s = Variant::Contact.structure(params)?;
    let chart = s.chart().clone();
    for (fs, gs) in [("x", "y"), ("q", "p"), ("y*q", "kappa"), ("x^2*p", "y + kappa*q")] {
        let f = ScalarField::parse(fs, &chart, &BTreeMap::new())?;
        let gg = ScalarField::parse(gs, &chart, &BTreeMap::new())?;
        let derived = -jacobi_bracket_sharp(&s, &f, &gg, &at)?;
        rows.push(DiscrepancyRow::new(
            format!("contact bracket {{{fs}, {gs}}}"),
            contact_bracket_printed(params, &f, &gg, x),
            derived,
        ));
    }
    Ok(rows)
}

/// Per-time deltas between two variants on `(x, y, q, p)`.
#[derive(Debug, Clone, Serialize)]
pub struct VariantDelta {
    pub first: Variant,
    pub second: Variant,
    pub times: Vec<f64>,
    pub deltas: Vec<[f64; 4]>,
    pub max_delta: f64,
}

pub fn compare_variants(
    coeffs: &LinearHamiltonianCoefficients,
    params: &ModelParameters,
    first: Variant,
    second: Variant,
    x0: &[f64],
    opts: &IntegrationOptions,
) -> Result<VariantDelta> {
    let a = integrate_eom(coeffs, params, first, x0, opts)?;
    let b = integrate_eom(coeffs, params, second, x0, opts)?;
    let n = a.len().min(b.len());
    let mut deltas = Vec::with_capacity(n);
    let mut max_delta: f64 = 0.0;
    for i in 0..n {
        let (u, v) = (a.states[i].values(), b.states[i].values());
        let d = [u[0] - v[0], u[1] - v[1], u[2] - v[2], u[3] - v[3]];
        max_delta = d.iter().fold(max_delta, |m, x| m.max(x.abs()));
        deltas.push(d);
    }
    Ok(VariantDelta { first, second, times: a.times[..n].to_vec(), deltas, max_delta })
}

/// Cross partials of the split energy vanish symbolically.
pub fn split_independence(split: &SplitEnergy) -> bool {
    [X, Y, K].iter().all(|&i| split.h_pq.partial(i).is_zero())
        && [Q, P, K].iter().all(|&i| split.h_xy.partial(i).is_zero())
}

