//! Built-in structures, invariant metrics on the Jacobi-group charts, and
//! the Cayley pullback.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::chart::{Bound, Chart, ChartPoint, GuardDoc};
use crate::doc::{ChartDoc, DarbouxDoc, StructureDoc};
use crate::dynamics::hamiltonian_field_closed;
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::field::ScalarField;
use crate::forms::{ChartMap, KForm};
use crate::scalar::Real;
use crate::structures::{CanonicalThetaSpec, StructureSpec};

/// Catalog entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    DarbouxContact(usize),
    DarbouxCosymplectic(usize),
    Heisenberg,
    XjtGtacos,
    XjtContact,
}

impl FromStr for Builtin {
    type Err = Error;

    /// Accepts `darboux_contact`, `darboux_contact(2)`, `heisenberg`, ….
    fn from_str(s: &str) -> Result<Builtin> {
        let s = s.trim();
        let (head, n) = match s.find('(') {
            Some(open) if s.ends_with(')') => {
                let n: usize = s[open + 1..s.len() - 1]
                    .trim()
                    .parse()
                    .map_err(|_| Error::UnknownStructure(s.to_string()))?;
                (&s[..open], Some(n))
            }
            _ => (s, None),
        };
        let dim = n.unwrap_or(1);
        let b = match head {
            "darboux_contact" => Builtin::DarbouxContact(dim),
            "darboux_cosymplectic" => Builtin::DarbouxCosymplectic(dim),
            "heisenberg" if n.is_none() => Builtin::Heisenberg,
            "xjt_gtacos" if n.is_none() => Builtin::XjtGtacos,
            "xjt_contact" if n.is_none() => Builtin::XjtContact,
            _ => return Err(Error::UnknownStructure(s.to_string())),
        };
        if dim == 0 {
            return Err(Error::InvalidParameters("Darboux families need n >= 1".into()));
        }
        Ok(b)
    }
}

impl Builtin {
    pub fn catalog() -> Vec<Builtin> {
        vec![
            Builtin::DarbouxContact(1),
            Builtin::DarbouxContact(2),
            Builtin::DarbouxCosymplectic(1),
            Builtin::DarbouxCosymplectic(2),
            Builtin::Heisenberg,
            Builtin::XjtGtacos,
            Builtin::XjtContact,
        ]
    }

    pub fn name(&self) -> String {
        match self {
            Builtin::DarbouxContact(n) => format!("darboux_contact({n})"),
            Builtin::DarbouxCosymplectic(n) => format!("darboux_cosymplectic({n})"),
            Builtin::Heisenberg => "heisenberg".into(),
            Builtin::XjtGtacos => "xjt_gtacos".into(),
            Builtin::XjtContact => "xjt_contact".into(),
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            Builtin::DarbouxContact(_) => "η = dκ − p_i dq^i, Ω = dη",
            Builtin::DarbouxCosymplectic(_) => "θ = dκ, Ω = dq^i ∧ dp_i",
            Builtin::Heisenberg => "η = dκ − y dx, Ω = dη",
            Builtin::XjtGtacos => "θ = √δ(dκ − p dq + q dp), ω = (k/y²)dx∧dy + 2ν dq∧dp",
            Builtin::XjtContact => "η₀ = √δ dκ + (k/y)dx + ν(−p dq + q dp), Ω = dη₀",
        }
    }

    pub fn doc(&self, params: &ModelParameters) -> Result<StructureDoc> {
        match *self {
            Builtin::DarbouxContact(n) => Ok(darboux_doc(n, true)),
            Builtin::DarbouxCosymplectic(n) => Ok(darboux_doc(n, false)),
            Builtin::Heisenberg => Ok(StructureDoc {
                name: self.name(),
                chart: ChartDoc {
                    name: "heisenberg".into(),
                    coordinates: names(&["x", "y", "kappa"]),
                    guards: vec![],
                    darboux: Some(DarbouxDoc { q: names(&["x"]), p: names(&["y"]), kappa: Some("kappa".into()) }),
                },
                parameters: BTreeMap::new(),
                theta: table(&[("kappa", "1"), ("x", "-y")]),
                omega: table(&[("x,y", "1")]),
            }),
            Builtin::XjtGtacos => {
                params.validate()?;
                Ok(StructureDoc {
                    name: self.name(),
                    chart: xjt_chart_doc(),
                    parameters: params.knd(),
                    theta: table(&[("kappa", "sqrt(delta)"), ("q", "-sqrt(delta)*p"), ("p", "sqrt(delta)*q")]),
                    omega: table(&[("x,y", "k/y^2"), ("q,p", "2*nu")]),
                })
            }
            Builtin::XjtContact => {
                params.validate()?;
                Ok(StructureDoc {
                    name: self.name(),
                    chart: xjt_chart_doc(),
                    parameters: params.knd(),
                    theta: table(&[("kappa", "sqrt(delta)"), ("x", "k/y"), ("q", "-nu*p"), ("p", "nu*q")]),
                    omega: table(&[("x,y", "k/y^2"), ("q,p", "2*nu")]),
                })
            }
        }
    }

    pub fn build<T: Real>(&self, params: &ModelParameters) -> Result<StructureSpec<T>> {
        StructureSpec::from_doc(&self.doc(params)?)
    }
}

/// Looks up a catalog structure by name.
pub fn builtin<T: Real>(name: &str, params: &ModelParameters) -> Result<StructureSpec<T>> {
    name.parse::<Builtin>()?.build(params)
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn table(v: &[(&str, &str)]) -> BTreeMap<String, String> {
    v.iter().map(|(k, e)| (k.to_string(), e.to_string())).collect()
}

fn darboux_names(n: usize) -> (Vec<String>, Vec<String>) {
    if n == 1 {
        (names(&["q"]), names(&["p"]))
    } else {
        ((1..=n).map(|i| format!("q{i}")).collect(), (1..=n).map(|i| format!("p{i}")).collect())
    }
}

fn darboux_doc(n: usize, contact: bool) -> StructureDoc {
    let (q, p) = darboux_names(n);
    let mut coordinates = q.clone();
    coordinates.extend(p.iter().cloned());
    coordinates.push("kappa".into());
    let mut theta = BTreeMap::from([("kappa".to_string(), "1".to_string())]);
    let mut omega = BTreeMap::new();
    for i in 0..n {
        if contact {
            theta.insert(q[i].clone(), format!("-{}", p[i]));
        }
        omega.insert(format!("{},{}", q[i], p[i]), "1".to_string());
    }
    let family = if contact { "darboux_contact" } else { "darboux_cosymplectic" };
    StructureDoc {
        name: format!("{family}({n})"),
        chart: ChartDoc {
            name: format!("darboux{n}"),
            coordinates,
            guards: vec![],
            darboux: Some(DarbouxDoc { q, p, kappa: Some("kappa".into()) }),
        },
        parameters: BTreeMap::new(),
        theta,
        omega,
    }
}

fn upper_half_plane_guard() -> GuardDoc {
    GuardDoc { coordinate: Some("y".into()), expression: None, bound: 0.0, kind: Bound::Greater, strict: true }
}

fn xjt_chart_doc() -> ChartDoc {
    ChartDoc {
        name: "xjt".into(),
        coordinates: names(&["x", "y", "q", "p", "kappa"]),
        guards: vec![upper_half_plane_guard()],
        darboux: None,
    }
}

/// Chart `(x, y, q, p, κ)` with `y > 0`.
pub fn xjt_chart() -> Arc<Chart> {
    Arc::new(xjt_chart_doc().build().expect("static chart"))
}

/// Parameters of the Jacobi-group models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub k: f64,
    pub nu: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `α = √k/2, γ = √ν` instead of `α = k/2, γ = ν`.
    #[serde(default)]
    pub sqrt_parametrization: bool,
}

impl Default for ModelParameters {
    fn default() -> Self {
        ModelParameters::new(1.0, 1.0, 1.0)
    }
}

impl ModelParameters {
    /// `α = k/2, γ = ν, β = 0`.
    pub fn new(k: f64, nu: f64, delta: f64) -> Self {
        ModelParameters { k, nu, delta, alpha: k / 2.0, beta: 0.0, gamma: nu, sqrt_parametrization: false }
    }

    /// `α = √k/2, γ = √ν, β = 0`.
    pub fn new_sqrt(k: f64, nu: f64, delta: f64) -> Self {
        ModelParameters {
            alpha: k.sqrt() / 2.0,
            gamma: nu.sqrt(),
            sqrt_parametrization: true,
            ..Self::new(k, nu, delta)
        }
    }

    /// Metric-only parameters; `k` and `ν` are derived back from `α, γ`.
    pub fn metric(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Self {
        ModelParameters { k: 2.0 * alpha, nu: gamma, delta, alpha, beta, gamma, sqrt_parametrization: false }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k", self.k), ("nu", self.nu), ("delta", self.delta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameters(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameters(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// Whether `(α, γ)` follows from `(k, ν)` under the chosen
    /// parametrization.
    pub fn ak_consistent(&self) -> bool {
        let (a, g) = if self.sqrt_parametrization {
            (self.k.sqrt() / 2.0, self.nu.sqrt())
        } else {
            (self.k / 2.0, self.nu)
        };
        (a - self.alpha).abs() <= 1e-15 * a.abs().max(1.0) && (g - self.gamma).abs() <= 1e-15 * g.abs().max(1.0)
    }

    pub fn knd(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([("k".into(), self.k), ("nu".into(), self.nu), ("delta".into(), self.delta)])
    }
}

/// Group chart `(x, y, θ_ang, p, q, κ)` with `y > 0`.
pub fn group_chart() -> Arc<Chart> {
    Arc::new(
        Chart::new("jacobi_group", &["x", "y", "theta_ang", "p", "q", "kappa"])
            .with_lower("y", 0.0, true)
            .expect("static chart"),
    )
}

/// Coordinates of the chart for metric case 1..5.
pub fn metric_case_coordinates(case: u8) -> Result<&'static [&'static str]> {
    Ok(match case {
        1 => &["x", "y"],
        2 => &["x", "y", "theta_ang"],
        3 => &["x", "y", "p", "q"],
        4 => &["x", "y", "p", "q", "kappa"],
        5 => &["x", "y", "theta_ang", "p", "q", "kappa"],
        _ => return Err(Error::InvalidParameters(format!("metric case {case} not in 1..5"))),
    })
}

pub fn metric_case_chart(case: u8) -> Result<Arc<Chart>> {
    let coords = metric_case_coordinates(case)?;
    Ok(Arc::new(Chart::new(format!("metric_case{case}"), coords).with_lower("y", 0.0, true)?))
}

fn check_case_parameters(case: u8, p: &ModelParameters) -> Result<()> {
    let zero = |v: f64| v == 0.0;
    let pos = |v: f64| v > 0.0;
    let ok = match case {
        1 => pos(p.alpha) && zero(p.beta) && zero(p.gamma) && zero(p.delta),
        2 => pos(p.alpha) && pos(p.beta) && zero(p.gamma) && zero(p.delta),
        3 => pos(p.alpha) && zero(p.beta) && pos(p.gamma) && zero(p.delta),
        4 => pos(p.alpha) && zero(p.beta) && pos(p.gamma) && pos(p.delta),
        5 => pos(p.alpha) && pos(p.beta) && pos(p.gamma) && pos(p.delta),
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!(
            "case {case} inconsistent with alpha={}, beta={}, gamma={}, delta={}",
            p.alpha, p.beta, p.gamma, p.delta
        )))
    }
}

/// The six invariant one-forms at a group-chart point, as covectors in
/// `(x, y, θ_ang, p, q, κ)`.
pub fn invariant_one_forms<T: Real>(params: &ModelParameters, at: &ChartPoint<T>) -> Result<[Vec<T>; 6]> {
    if at.values().len() != 6 {
        return Err(Error::PointLength { chart: at.chart().name().into(), expected: 6, found: at.values().len() });
    }
    let v = at.values();
    let (x, y, th, p, q) = (v[0], v[1], v[2], v[3], v[4]);
    if y <= T::zero() {
        return Err(Error::Domain { chart: at.chart().name().into(), guard: "y > 0".into(), value: y.as_f64() });
    }
    let l = T::lit;
    let (sa, sb, sg, sd) = (l(params.alpha.sqrt()), l(params.beta.sqrt()), l(params.gamma.sqrt()), l(params.delta.sqrt()));
    let (c2, s2) = ((th * l(2.0)).cos(), (th * l(2.0)).sin());
    let (c1, s1) = (th.cos(), th.sin());
    let ry = y.sqrt();
    let z = T::zero();
    Ok([
        vec![sa / y * c2, sa / y * s2, z, z, z, z],
        vec![-sa / y * s2, sa / y * c2, z, z, z, z],
        vec![sb / y, z, sb * l(2.0), z, z, z],
        vec![z, z, z, sg * (ry * c1 - x / ry * s1), -sg * s1 / ry, z],
        vec![z, z, z, sg * (ry * s1 + x / ry * c1), sg * c1 / ry, z],
        vec![z, z, z, sd * q, -sd * p, sd],
    ])
}

/// Gram matrix `Σ λ_i ⊗ λ_i` for metric case 1..5 on that case's chart.
pub fn metric_matrix<T: Real>(case: u8, params: &ModelParameters, at: &ChartPoint<T>) -> Result<DMatrix<T>> {
    let coords = metric_case_coordinates(case)?;
    check_case_parameters(case, params)?;
    if at.values().len() != coords.len() {
        return Err(Error::PointLength { chart: format!("metric_case{case}"), expected: coords.len(), found: at.values().len() });
    }
    let full_names = ["x", "y", "theta_ang", "p", "q", "kappa"];
    let slots: Vec<usize> = coords.iter().map(|c| full_names.iter().position(|f| f == c).unwrap()).collect();
    let mut full = vec![T::zero(); 6];
    for (k, &s) in slots.iter().enumerate() {
        full[s] = at.values()[k];
    }
    let point = ChartPoint::new(group_chart(), full)?;
    let lambdas = invariant_one_forms(params, &point)?;
    let n = coords.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        lambdas.iter().fold(T::zero(), |acc, l| acc + l[slots[i]] * l[slots[j]])
    }))
}

/// Target chart `(w1, w2, z1, z2)` of the disk model, `w1² + w2² < 1`.
pub fn disk_chart() -> Arc<Chart> {
    Arc::new(
        Chart::new("siegel_jacobi_disk", &["w1", "w2", "z1", "z2"])
            .with_guard(GuardDoc {
                coordinate: None,
                expression: Some("w1^2 + w2^2".into()),
                bound: 1.0,
                kind: Bound::Less,
                strict: true,
            })
            .expect("static chart"),
    )
}

/// Source chart `(x, y, p, q)` of the upper-half-plane model, `y > 0`.
pub fn xj1_chart() -> Arc<Chart> {
    Arc::new(Chart::new("xj1", &["x", "y", "p", "q"]).with_lower("y", 0.0, true).expect("static chart"))
}

fn cayley_eval(s: &[f64]) -> [f64; 4] {
    let i = Complex::new(0.0, 1.0);
    let v = Complex::new(s[0], s[1]);
    let (p, q) = (s[2], s[3]);
    let w = (v - i) / (v + i);
    let z = 2.0 * i * (p * v + q) / (v + i);
    [w.re, w.im, z.re, z.im]
}

/// `w = (v − i)/(v + i)`, `z = 2i(pv + q)/(v + i)`, `v = x + iy`, split
/// into real parts. Components are opaque, so Jacobians are finite
/// differences.
pub fn cayley_map() -> ChartMap<f64> {
    let comps = (0..4)
        .map(|k| ScalarField::opaque(move |s: &[f64]| cayley_eval(s)[k]))
        .collect();
    ChartMap::new(xj1_chart(), disk_chart(), comps).expect("four components")
}

/// Real split of the disk Kähler form:
/// `ω = (4k/P²) dw1∧dw2 + (2ν/P) a1∧a2`, `P = 1 − |w|²`,
/// `a1 = dz1 + e1 dw1 + e2 dw2`, `a2 = dz2 + e1 dw2 − e2 dw1`,
/// `e1 + i e2 = (z + z̄ w)/P`.
pub fn disk_kahler_form<T: Real>(params: &ModelParameters) -> Result<KForm<T>> {
    params.validate()?;
    let chart = disk_chart();
    let names = chart.coordinates().to_vec();
    let vars = params.knd();
    let e = |src: &str| -> Result<ScalarField<T>> { Ok(ScalarField::Symbolic(parse(src)?.bind(&names, &vars)?)) };
    let p = "(1 - w1^2 - w2^2)";
    let e1 = format!("(z1 + z1*w1 + z2*w2)/{p}");
    let e2 = format!("(z2 + z1*w2 - z2*w1)/{p}");
    let a1 = KForm::one_form(chart.clone(), vec![e(&e1)?, e(&e2)?, e("1")?, e("0")?])?;
    let a2 = KForm::one_form(chart.clone(), vec![e(&format!("-{e2}"))?, e(&e1)?, e("0")?, e("1")?])?;
    let dw = KForm::from_terms(chart.clone(), 2, [(vec![0, 1], e(&format!("4*k/{p}^2"))?)])?;
    dw.add(&a1.wedge(&a2)?.scale(&e(&format!("2*nu/{p}"))?))
}

/// Darboux chart `(q1, p1, q2, p2, κ)` of the extended half-plane, `p1 < 0`.
pub fn xjt_darboux_chart() -> Arc<Chart> {
    Arc::new(
        Chart::new("xjt_darboux", &["q1", "p1", "q2", "p2", "kappa"])
            .with_guard(GuardDoc { coordinate: Some("p1".into()), expression: None, bound: 0.0, kind: Bound::Less, strict: true })
            .and_then(|c| c.with_darboux_names(&["q1", "q2"], &["p1", "p2"], Some("kappa")))
            .expect("static chart"),
    )
}

fn knd_expr(src: &str, coords: &[String], params: &ModelParameters) -> Result<Expr> {
    parse(src)?.bind(coords, &params.knd())
}

/// `q1 = kx, p1 = −1/y, q2 = 2νq, p2 = p`, κ unchanged.
pub fn xjt_to_darboux<T: Real>(params: &ModelParameters) -> Result<ChartMap<T>> {
    params.validate()?;
    let src = xjt_chart();
    let c = src.coordinates().to_vec();
    let comps = ["k*x", "-1/y", "2*nu*q", "p", "kappa"]
        .iter()
        .map(|s| knd_expr(s, &c, params).map(ScalarField::Symbolic))
        .collect::<Result<Vec<_>>>()?;
    ChartMap::new(src, xjt_darboux_chart(), comps)
}

/// Inverse of [`xjt_to_darboux`].
pub fn darboux_to_xjt<T: Real>(params: &ModelParameters) -> Result<ChartMap<T>> {
    params.validate()?;
    let src = xjt_darboux_chart();
    let c = src.coordinates().to_vec();
    let comps = ["q1/k", "-1/p1", "q2/(2*nu)", "p2", "kappa"]
        .iter()
        .map(|s| knd_expr(s, &c, params).map(ScalarField::Symbolic))
        .collect::<Result<Vec<_>>>()?;
    ChartMap::new(src, xjt_chart(), comps)
}

/// `θ` of `xjt_gtacos` in the Darboux chart: `a = (0, −√δ p2/(2ν))`,
/// `b = (0, √δ q2/(2ν))`, `c = √δ`.
pub fn xjt_theta_spec<T: Real>(params: &ModelParameters) -> Result<CanonicalThetaSpec<T>> {
    params.validate()?;
    let c = xjt_darboux_chart().coordinates().to_vec();
    let f = |s: &str| knd_expr(s, &c, params).map(ScalarField::Symbolic);
    Ok(CanonicalThetaSpec {
        a: vec![f("0")?, f("-sqrt(delta)*p2/(2*nu)")?],
        b: vec![f("0")?, f("sqrt(delta)*q2/(2*nu)")?],
        c: f("sqrt(delta)")?,
    })
}

/// Closed-form `X_H` of `xjt_gtacos` computed in Darboux coordinates and
/// pushed forward to `(x, y, q, p, κ)`.
pub fn xjt_closed_field<T: Real>(params: &ModelParameters, h: &ScalarField<T>, at: &ChartPoint<T>) -> Result<Vec<T>> {
    let fwd = xjt_to_darboux::<T>(params)?;
    let back = darboux_to_xjt::<T>(params)?;
    let d_at = fwd.apply(at)?;
    let h_d = back.pullback_function(h);
    let spec = xjt_theta_spec::<T>(params)?;
    let coeffs = hamiltonian_field_closed(&spec, &h_d, &d_at)?;
    let layout = d_at.chart().darboux().ok_or(Error::NoDarbouxLayout)?.clone();
    let v = coeffs.to_vector(&layout, 5)?;
    back.push_vector(&d_at, &v)
}
