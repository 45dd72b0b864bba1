//! Almost cosymplectic pairs `(θ, Ω)`: classification, Reeb vector, ♭ and ♯.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chart::{Chart, ChartPoint};
use crate::doc::StructureDoc;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::ScalarField;
use crate::forms::KForm;
use crate::scalar::Real;

/// Default number of quasi-random probe points for classification.
pub const DEFAULT_PROBES: usize = 64;

/// Tolerance for classification identities: `1e-9` in `f64`, looser for
/// `f32` where round-off dominates.
pub fn classification_tolerance<T: Real>() -> T {
    T::lit(1e-9).max(T::machine_eps() * T::lit(1e3))
}

/// A one-form `θ` and a two-form `Ω` on an odd-dimensional chart.
#[derive(Debug, Clone)]
pub struct StructureSpec<T> {
    name: String,
    chart: Arc<Chart>,
    theta: KForm<T>,
    omega: KForm<T>,
    n: usize,
    parameters: BTreeMap<String, f64>,
    doc: Option<StructureDoc>,
}

impl<T: Real> StructureSpec<T> {
    pub fn new(name: impl Into<String>, theta: KForm<T>, omega: KForm<T>) -> Result<Self> {
        let chart = theta.chart().clone();
        crate::chart::same_chart(omega.chart(), &chart)?;
        let dim = chart.dimension();
        if dim % 2 == 0 {
            return Err(Error::InvalidChart(format!("structure chart `{}` has even dimension {dim}", chart.name())));
        }
        if theta.degree() != 1 || omega.degree() != 2 {
            return Err(Error::InvalidForm(format!(
                "expected degrees (1, 2), got ({}, {})",
                theta.degree(),
                omega.degree()
            )));
        }
        Ok(StructureSpec {
            name: name.into(),
            chart,
            theta,
            omega,
            n: dim / 2,
            parameters: BTreeMap::new(),
            doc: None,
        })
    }

    pub fn from_doc(doc: &StructureDoc) -> Result<Self> {
        let chart = Arc::new(doc.chart.build()?);
        let theta = doc.form(&chart, 1, &doc.theta)?;
        let omega = doc.form(&chart, 2, &doc.omega)?;
        let mut s = Self::new(doc.name.clone(), theta, omega)?;
        s.parameters = doc.parameters.clone();
        s.doc = Some(doc.clone());
        Ok(s)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn theta(&self) -> &KForm<T> {
        &self.theta
    }

    pub fn omega(&self) -> &KForm<T> {
        &self.omega
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn parameters(&self) -> &BTreeMap<String, f64> {
        &self.parameters
    }

    /// Source document, when the structure was built from one.
    pub fn doc(&self) -> Option<&StructureDoc> {
        self.doc.as_ref()
    }

    /// Same structure with finite-difference coefficient derivatives.
    pub fn to_finite_difference(&self) -> Self {
        StructureSpec {
            theta: self.theta.to_finite_difference(),
            omega: self.omega.to_finite_difference(),
            ..self.clone()
        }
    }

    pub fn theta_at(&self, x: &[T]) -> Vec<T> {
        self.theta.eval_raw(x).to_covector()
    }

    /// `W_ij = Ω(∂_i, ∂_j)`.
    pub fn omega_matrix(&self, x: &[T]) -> DMatrix<T> {
        self.omega.eval_raw(x).to_matrix()
    }

    /// Matrix of ♭: `(X♭)_j = Σ_i (Ω_ij + θ_i θ_j) X^i`.
    pub fn flat_matrix(&self, x: &[T]) -> DMatrix<T> {
        let w = self.omega_matrix(x);
        let t = DVector::from_vec(self.theta_at(x));
        w.transpose() + &t * t.transpose()
    }

    pub fn flat(&self, v: &[T], at: &ChartPoint<T>) -> Result<Vec<T>> {
        at.require_chart(&self.chart)?;
        check_len(v.len(), self.chart.dimension())?;
        let f = self.flat_matrix(at.values());
        Ok((f * DVector::from_column_slice(v)).iter().copied().collect())
    }

    pub fn sharp(&self, alpha: &[T], at: &ChartPoint<T>) -> Result<Vec<T>> {
        at.require_chart(&self.chart)?;
        check_len(alpha.len(), self.chart.dimension())?;
        solve_flat(&self.flat_matrix(at.values()), alpha)
    }

    /// Reeb vector from `R⌟Ω = 0, R⌟θ = 1`, solved as a stacked
    /// `(2n+2) × (2n+1)` least-squares system by QR.
    pub fn reeb(&self, at: &ChartPoint<T>) -> Result<Vec<T>> {
        at.require_chart(&self.chart)?;
        self.reeb_raw(at.values())
    }

    pub fn reeb_raw(&self, x: &[T]) -> Result<Vec<T>> {
        let d = self.chart.dimension();
        let w = self.omega_matrix(x);
        let t = self.theta_at(x);
        let a = DMatrix::from_fn(d + 1, d, |r, c| if r < d { w[(c, r)] } else { t[c] });
        let mut b = DVector::zeros(d + 1);
        b[d] = T::one();
        let qr = a.clone().qr();
        let r = qr.r();
        let diag_max = (0..d).fold(T::zero(), |m, i| m.max(r[(i, i)].abs()));
        let rank_tol = diag_max * T::machine_eps() * T::lit(1e3);
        if (0..d).any(|i| r[(i, i)].abs() <= rank_tol) {
            return Err(Error::Degenerate("Reeb system is rank deficient".into()));
        }
        let rhs = qr.q().transpose() * &b;
        let sol = r
            .solve_upper_triangular(&rhs)
            .ok_or_else(|| Error::Degenerate("Reeb system is rank deficient".into()))?;
        let residual = (&a * &sol - &b).amax();
        if residual > T::lit(1e-6).max(T::machine_eps().sqrt()) {
            return Err(Error::Degenerate(format!("Reeb system inconsistent (residual {})", residual.as_f64())));
        }
        Ok(sol.iter().copied().collect())
    }

    /// Top coefficient of `θ ∧ Ωⁿ`.
    pub fn volume_coefficient(&self, x: &[T]) -> T {
        let t = self.theta.eval_raw(x);
        let w = self.omega.eval_raw(x);
        (0..self.n).fold(t, |acc, _| acc.wedge(&w)).top_coefficient()
    }

    /// Numerical rank of the Ω matrix.
    pub fn omega_rank(&self, x: &[T]) -> usize {
        let w = self.omega_matrix(x);
        let sv = w.singular_values();
        let smax = sv.iter().fold(T::zero(), |m, s| m.max(*s));
        sv.iter().filter(|&&s| s > smax * T::machine_eps() * T::lit(1e3)).count()
    }

    pub fn classify(&self, probes: &[ChartPoint<T>]) -> Result<StructureClass> {
        self.classify_with(probes, classification_tolerance())
    }

    pub fn classify_default(&self) -> Result<StructureClass> {
        self.classify(&self.chart.probe_points(DEFAULT_PROBES))
    }

    pub fn classify_with(&self, probes: &[ChartPoint<T>], tol: T) -> Result<StructureClass> {
        if probes.is_empty() {
            return Err(Error::EmptyProbes);
        }
        let d_theta = self.theta.exterior_derivative()?;
        let d_omega = if self.chart.dimension() >= 3 {
            Some(self.omega.exterior_derivative()?)
        } else {
            None
        };
        let mut min_volume = f64::INFINITY;
        let mut rank_ok = true;
        let mut max_d_omega = 0.0f64;
        let mut max_d_theta = 0.0f64;
        let mut max_contact = 0.0f64;
        for p in probes {
            p.require_chart(&self.chart)?;
            let x = p.values();
            min_volume = min_volume.min(self.volume_coefficient(x).abs().as_f64());
            rank_ok &= self.omega_rank(x) == 2 * self.n;
            if let Some(dw) = &d_omega {
                max_d_omega = max_d_omega.max(dw.eval_raw(x).max_norm().as_f64());
            }
            let dt = d_theta.eval_raw(x);
            max_d_theta = max_d_theta.max(dt.max_norm().as_f64());
            let diff = dt.add(&self.omega.eval_raw(x).scale(-T::one()));
            max_contact = max_contact.max(diff.max_norm().as_f64());
        }
        let tol = tol.as_f64();
        let acos = rank_ok && min_volume > tol;
        let gtacos = acos && max_d_omega <= tol;
        let epsilon = if gtacos { self.tacs_epsilon() } else { None };
        Ok(StructureClass {
            acos,
            gtacos,
            cos: gtacos && max_d_theta <= tol,
            contact: acos && max_contact <= tol,
            tacs: epsilon.is_some(),
            epsilon,
            probes: probes.len(),
            min_volume,
            max_d_omega,
            max_d_theta,
            max_contact_residual: max_contact,
        })
    }

    /// `ε` when θ is literally `dκ + ε Σ p_i dq^i` in the chart's Darboux
    /// layout, read off the expression trees.
    pub fn tacs_epsilon(&self) -> Option<f64> {
        let layout = self.chart.darboux()?;
        let kappa = layout.kappa?;
        if layout.n() == 0 {
            return None;
        }
        let coeff = |i: usize| self.theta.coefficient(&[i]);
        if coeff(kappa)?.expr()?.as_num()? != 1.0 {
            return None;
        }
        let mut eps: Option<f64> = None;
        for i in 0..self.chart.dimension() {
            if i == kappa {
                continue;
            }
            let slot = layout.q.iter().position(|&q| q == i);
            let e = match (slot, coeff(i)) {
                (_, None) => 0.0,
                (None, Some(_)) => return None,
                (Some(k), Some(c)) => linear_in(c.expr()?, layout.p[k])?,
            };
            if slot.is_some() {
                match eps {
                    None => eps = Some(e),
                    Some(prev) if prev != e => return None,
                    _ => {}
                }
            }
        }
        eps
    }
}

fn check_len(found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::Input(format!("vector has {found} components, chart dimension is {expected}")));
    }
    Ok(())
}

/// `e` when `expr` is literally `e * x_i` (any factor order, or a bare or
/// negated coordinate).
fn linear_in(expr: &Expr, i: usize) -> Option<f64> {
    match expr {
        Expr::Coord(j) if *j == i => Some(1.0),
        Expr::Neg(inner) => linear_in(inner, i).map(|e| -e),
        Expr::Mul(a, b) => match (a.as_ref(), b.as_ref()) {
            (Expr::Num(e), other) | (other, Expr::Num(e)) => linear_in(other, i).map(|f| e * f),
            _ => None,
        },
        _ => None,
    }
}

/// Solves `F X = α` for the ♭ matrix, rejecting numerically singular `F`.
pub fn solve_flat<T: Real>(f: &DMatrix<T>, alpha: &[T]) -> Result<Vec<T>> {
    let sv = f.clone().singular_values();
    let smax = sv.iter().fold(T::zero(), |m, s| m.max(*s));
    let smin = sv.iter().fold(smax, |m, s| m.min(*s));
    if smax == T::zero() || smin <= smax * T::machine_eps() * T::lit(1e3) {
        return Err(Error::SingularFlat);
    }
    f.clone()
        .lu()
        .solve(&DVector::from_column_slice(alpha))
        .map(|v| v.iter().copied().collect())
        .ok_or(Error::SingularFlat)
}

/// Flags from the odd-dimensional structure table, plus the residuals they
/// were decided on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureClass {
    pub acos: bool,
    pub gtacos: bool,
    pub cos: bool,
    pub contact: bool,
    pub tacs: bool,
    pub epsilon: Option<f64>,
    pub probes: usize,
    pub min_volume: f64,
    pub max_d_omega: f64,
    pub max_d_theta: f64,
    pub max_contact_residual: f64,
}

impl StructureClass {
    /// `cos ⇒ gtacos ⇒ acos`, `contact ⇒ acos`, `tacs ⇒ gtacos`.
    pub fn lattice_holds(&self) -> bool {
        (!self.cos || self.gtacos) && (!self.gtacos || self.acos) && (!self.contact || self.acos) && (!self.tacs || self.gtacos)
    }
}

/// `θ = a_i dq^i + b_i dp_i + c dκ` in a Darboux chart with
/// `Ω = dq^i ∧ dp_i`. Coefficients are fields so that `a_i = ε p_i` fits.
#[derive(Debug, Clone)]
pub struct CanonicalThetaSpec<T> {
    pub a: Vec<ScalarField<T>>,
    pub b: Vec<ScalarField<T>>,
    pub c: ScalarField<T>,
}

impl<T: Real> CanonicalThetaSpec<T> {
    pub fn constant(a: &[f64], b: &[f64], c: f64) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::InvalidParameters(format!("a has {} entries, b has {}", a.len(), b.len())));
        }
        if c == 0.0 {
            return Err(Error::ZeroThetaC);
        }
        Ok(CanonicalThetaSpec {
            a: a.iter().map(|&v| ScalarField::constant(v)).collect(),
            b: b.iter().map(|&v| ScalarField::constant(v)).collect(),
            c: ScalarField::constant(c),
        })
    }

    /// Albert's transitive form `a_i = ε p_i, b = 0, c = 1` on `chart`.
    pub fn tacs(chart: &Chart, epsilon: f64) -> Result<Self> {
        let layout = chart.darboux().ok_or(Error::NoDarbouxLayout)?;
        Ok(CanonicalThetaSpec {
            a: layout.p.iter().map(|&p| ScalarField::Symbolic(Expr::num(epsilon) * Expr::coord(p))).collect(),
            b: vec![ScalarField::zero(); layout.n()],
            c: ScalarField::constant(1.0),
        })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// The pair `(θ, Ω)` on `chart` with its Darboux layout.
    pub fn structure(&self, name: &str, chart: Arc<Chart>) -> Result<StructureSpec<T>> {
        let layout = chart.darboux().cloned().ok_or(Error::NoDarbouxLayout)?;
        let kappa = layout.kappa.ok_or(Error::NoDarbouxLayout)?;
        if layout.n() != self.n() || self.b.len() != self.n() || chart.dimension() != 2 * self.n() + 1 {
            return Err(Error::InvalidParameters("theta spec does not match the Darboux layout".into()));
        }
        let mut theta = vec![(vec![kappa], self.c.clone())];
        let mut omega = Vec::new();
        for i in 0..self.n() {
            theta.push((vec![layout.q[i]], self.a[i].clone()));
            theta.push((vec![layout.p[i]], self.b[i].clone()));
            omega.push((vec![layout.q[i], layout.p[i]], ScalarField::constant(1.0)));
        }
        StructureSpec::new(name, KForm::from_terms(chart.clone(), 1, theta)?, KForm::from_terms(chart, 2, omega)?)
    }

    /// Closed-form Reeb vector `(1/c) ∂/∂κ`.
    pub fn reeb(&self, chart: &Chart, x: &[T]) -> Result<Vec<T>> {
        let kappa = chart.darboux().and_then(|l| l.kappa).ok_or(Error::NoDarbouxLayout)?;
        let c = self.c.eval(x);
        if c == T::zero() {
            return Err(Error::ZeroThetaC);
        }
        let mut r = vec![T::zero(); chart.dimension()];
        r[kappa] = T::one() / c;
        Ok(r)
    }
}
