//! Hamiltonian, gradient and evolution vector fields, and brackets.
//!
//! The generic path solves the ♭ equation directly and is the reference
//! for every closed form in this crate.

use nalgebra::DVector;
use serde::Serialize;

use std::sync::Arc;

use crate::chart::{Chart, ChartPoint, DarbouxLayout};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::integrate::{integrate_field, IntegrationOptions, RunMetadata, Trajectory};
use crate::scalar::Real;
use crate::structures::{solve_flat, CanonicalThetaSpec, StructureClass, StructureSpec};

/// `R(H)` at raw coordinates.
pub fn reeb_derivative<T: Real>(s: &StructureSpec<T>, h: &ScalarField<T>, x: &[T]) -> Result<T> {
    let r = s.reeb_raw(x)?;
    Ok(directional(&r, h, x))
}

/// `V(f)` for a vector value `v`.
pub fn directional<T: Real>(v: &[T], f: &ScalarField<T>, x: &[T]) -> T {
    v.iter()
        .enumerate()
        .filter(|(_, c)| **c != T::zero())
        .fold(T::zero(), |acc, (i, &c)| acc + c * f.partial_at(i, x))
}

/// `X_H` from `♭(X_H) = dH − (R(H) + H) θ`.
pub fn hamiltonian_field_generic<T: Real>(
    s: &StructureSpec<T>,
    h: &ScalarField<T>,
    at: &ChartPoint<T>,
) -> Result<Vec<T>> {
    at.require_chart(s.chart())?;
    hamiltonian_field_raw(s, h, at.values())
}

pub fn hamiltonian_field_raw<T: Real>(s: &StructureSpec<T>, h: &ScalarField<T>, x: &[T]) -> Result<Vec<T>> {
    let dh = h.gradient_at(x);
    let rh = reeb_derivative(s, h, x)?;
    let hv = h.eval(x);
    let theta = s.theta_at(x);
    let rhs: Vec<T> = dh.iter().zip(&theta).map(|(&d, &t)| d - (rh + hv) * t).collect();
    solve_flat(&s.flat_matrix(x), &rhs)
}

/// `grad H` from `♭(grad H) = dH`.
pub fn gradient_field<T: Real>(s: &StructureSpec<T>, h: &ScalarField<T>, at: &ChartPoint<T>) -> Result<Vec<T>> {
    at.require_chart(s.chart())?;
    let x = at.values();
    solve_flat(&s.flat_matrix(x), &h.gradient_at(x))
}

/// Coefficients `(A_i, B_i, C)` of `X_H` on `∂/∂q^i, ∂/∂p_i, ∂/∂κ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HamiltonianFieldCoefficients<T> {
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub c: T,
}

impl<T: Real> HamiltonianFieldCoefficients<T> {
    /// Dense vector in chart order.
    pub fn to_vector(&self, layout: &DarbouxLayout, dimension: usize) -> Result<Vec<T>> {
        let kappa = layout.kappa.ok_or(Error::NoDarbouxLayout)?;
        let mut v = vec![T::zero(); dimension];
        for i in 0..layout.n() {
            v[layout.q[i]] = self.a[i];
            v[layout.p[i]] = self.b[i];
        }
        v[kappa] = self.c;
        Ok(v)
    }

    /// Reads `(A, B, C)` out of a dense vector.
    pub fn from_vector(v: &[T], layout: &DarbouxLayout) -> Result<Self> {
        let kappa = layout.kappa.ok_or(Error::NoDarbouxLayout)?;
        Ok(HamiltonianFieldCoefficients {
            a: layout.q.iter().map(|&i| v[i]).collect(),
            b: layout.p.iter().map(|&i| v[i]).collect(),
            c: v[kappa],
        })
    }
}

/// Closed form for `θ = a_i dq^i + b_i dp_i + c dκ`, `Ω = dq^i ∧ dp_i`:
/// `A_i = H_{p_i} − b_i R(H)`, `B_i = −H_{q^i} + a_i R(H)`,
/// `C = (−a_i H_{p_i} + b_i H_{q^i} − H)/c`, with `R = (1/c) ∂/∂κ`.
pub fn hamiltonian_field_closed<T: Real>(
    spec: &CanonicalThetaSpec<T>,
    h: &ScalarField<T>,
    at: &ChartPoint<T>,
) -> Result<HamiltonianFieldCoefficients<T>> {
    let layout = at.chart().darboux().ok_or(Error::NoDarbouxLayout)?;
    let kappa = layout.kappa.ok_or(Error::NoDarbouxLayout)?;
    if layout.n() != spec.n() {
        return Err(Error::InvalidParameters(format!(
            "theta spec has n = {}, chart has n = {}",
            spec.n(),
            layout.n()
        )));
    }
    let x = at.values();
    let c = spec.c.eval(x);
    if c == T::zero() {
        return Err(Error::ZeroThetaC);
    }
    let rh = h.partial_at(kappa, x) / c;
    let hv = h.eval(x);
    let mut a_out = Vec::with_capacity(spec.n());
    let mut b_out = Vec::with_capacity(spec.n());
    let mut c_acc = -hv;
    for i in 0..spec.n() {
        let (ai, bi) = (spec.a[i].eval(x), spec.b[i].eval(x));
        let hp = h.partial_at(layout.p[i], x);
        let hq = h.partial_at(layout.q[i], x);
        a_out.push(hp - bi * rh);
        b_out.push(-hq + ai * rh);
        c_acc += -ai * hp + bi * hq;
    }
    Ok(HamiltonianFieldCoefficients { a: a_out, b: b_out, c: c_acc / c })
}

/// A structure whose classification established `dθ = 0` and `dΩ = 0`.
#[derive(Debug, Clone, Copy)]
pub struct Cosymplectic<'a, T> {
    spec: &'a StructureSpec<T>,
}

impl<'a, T: Real> Cosymplectic<'a, T> {
    pub fn new(spec: &'a StructureSpec<T>, class: &StructureClass) -> Result<Self> {
        if class.cos {
            Ok(Cosymplectic { spec })
        } else {
            Err(Error::NotCosymplectic)
        }
    }

    /// Classifies on the default probes.
    pub fn check(spec: &'a StructureSpec<T>) -> Result<Self> {
        let class = spec.classify_default()?;
        Self::new(spec, &class)
    }

    pub fn spec(&self) -> &StructureSpec<T> {
        self.spec
    }

    /// Cosymplectic convention `X_H = grad H − R(H) R`.
    pub fn hamiltonian_field(&self, h: &ScalarField<T>, at: &ChartPoint<T>) -> Result<Vec<T>> {
        let grad = gradient_field(self.spec, h, at)?;
        let r = self.spec.reeb(at)?;
        let rh = directional(&r, h, at.values());
        Ok(grad.iter().zip(&r).map(|(&g, &ri)| g - rh * ri).collect())
    }

    /// `ℰ_H = X_H + R`.
    pub fn evolution_field(&self, h: &ScalarField<T>, at: &ChartPoint<T>) -> Result<Vec<T>> {
        let x = self.hamiltonian_field(h, at)?;
        let r = self.spec.reeb(at)?;
        Ok(x.iter().zip(&r).map(|(&a, &b)| a + b).collect())
    }
}

pub fn evolution_field<T: Real>(cos: &Cosymplectic<'_, T>, h: &ScalarField<T>, at: &ChartPoint<T>) -> Result<Vec<T>> {
    cos.evolution_field(h, at)
}

fn darboux_of(chart: &Chart) -> Result<&DarbouxLayout> {
    chart.darboux().ok_or(Error::NoDarbouxLayout)
}

/// `{f, g}_P = f_{q^i} g_{p_i} − g_{q^i} f_{p_i}`.
pub fn poisson_bracket<T: Real>(f: &ScalarField<T>, g: &ScalarField<T>, at: &ChartPoint<T>) -> Result<T> {
    let layout = darboux_of(at.chart())?;
    let x = at.values();
    Ok((0..layout.n()).fold(T::zero(), |acc, i| {
        let (q, p) = (layout.q[i], layout.p[i]);
        acc + f.partial_at(q, x) * g.partial_at(p, x) - g.partial_at(q, x) * f.partial_at(p, x)
    }))
}

/// Euler operator `f_e = f − p_i ∂f/∂p_i`.
pub fn euler_operator<T: Real>(f: &ScalarField<T>, layout: &DarbouxLayout) -> ScalarField<T> {
    layout
        .p
        .iter()
        .fold(f.clone(), |acc, &p| acc - ScalarField::coordinate(p) * f.partial(p))
}

/// Jacobi bracket `{f,g} = {f,g}_P + f_e g_κ − g_e f_κ` as a field, so it
/// can be nested.
pub fn jacobi_bracket_field<T: Real>(
    f: &ScalarField<T>,
    g: &ScalarField<T>,
    layout: &DarbouxLayout,
) -> Result<ScalarField<T>> {
    let kappa = layout.kappa.ok_or(Error::NoDarbouxLayout)?;
    let mut out = euler_operator(f, layout) * g.partial(kappa) - euler_operator(g, layout) * f.partial(kappa);
    for i in 0..layout.n() {
        let (q, p) = (layout.q[i], layout.p[i]);
        out = out + f.partial(q) * g.partial(p) - g.partial(q) * f.partial(p);
    }
    Ok(out)
}

pub fn jacobi_bracket<T: Real>(f: &ScalarField<T>, g: &ScalarField<T>, at: &ChartPoint<T>) -> Result<T> {
    let layout = darboux_of(at.chart())?;
    let kappa = layout.kappa.ok_or(Error::NoDarbouxLayout)?;
    let x = at.values();
    let fe = euler_operator(f, layout).eval(x);
    let ge = euler_operator(g, layout).eval(x);
    Ok(poisson_bracket(f, g, at)? + fe * g.partial_at(kappa, x) - ge * f.partial_at(kappa, x))
}

/// `{f,g}_J = −dη(♯df, ♯dg) − R(g) f + g R(f)`, taking `θ` as `η` and
/// `Ω` as `dη`.
pub fn jacobi_bracket_sharp<T: Real>(
    s: &StructureSpec<T>,
    f: &ScalarField<T>,
    g: &ScalarField<T>,
    at: &ChartPoint<T>,
) -> Result<T> {
    at.require_chart(s.chart())?;
    let x = at.values();
    let sf = DVector::from_vec(s.sharp(&f.gradient_at(x), at)?);
    let sg = DVector::from_vec(s.sharp(&g.gradient_at(x), at)?);
    let w = s.omega_matrix(x);
    let r = s.reeb_raw(x)?;
    let deta = (sf.transpose() * w * sg)[(0, 0)];
    Ok(-deta - directional(&r, g, x) * f.eval(x) + g.eval(x) * directional(&r, f, x))
}

/// `{f,g} = dη(X_f, X_g) + f R(g) − g R(f)` with generic Hamiltonian fields.
pub fn jacobi_bracket_fields<T: Real>(
    s: &StructureSpec<T>,
    f: &ScalarField<T>,
    g: &ScalarField<T>,
    at: &ChartPoint<T>,
) -> Result<T> {
    let x = at.values();
    let xf = DVector::from_vec(hamiltonian_field_generic(s, f, at)?);
    let xg = DVector::from_vec(hamiltonian_field_generic(s, g, at)?);
    let w = s.omega_matrix(x);
    let r = s.reeb_raw(x)?;
    Ok((xf.transpose() * w * xg)[(0, 0)] + f.eval(x) * directional(&r, g, x) - g.eval(x) * directional(&r, f, x))
}

/// One row of the transitive-structure comparison: a coordinate function
/// `f`, its generic field, the corrected printed field, and Albert's field.
#[derive(Debug, Clone, Serialize)]
pub struct AlbertRow {
    pub function: String,
    pub generic: Vec<f64>,
    pub corrected: Vec<f64>,
    pub albert: Vec<f64>,
    pub corrected_residual: f64,
    pub albert_residual: f64,
    /// `X_f⌟θ + f` for the generic field (zero in the corrected convention).
    pub contraction_generic: f64,
    /// `X_f⌟θ − ε f` for Albert's field (zero in Albert's convention).
    pub contraction_albert: f64,
}

/// Compares Hamiltonian fields of the coordinate functions on
/// `θ = dκ + ε p_i dq^i` against both the corrected and Albert's formulas.
pub fn albert_comparison(epsilon: f64, chart: std::sync::Arc<Chart>, point: &[f64]) -> Result<Vec<AlbertRow>> {
    let spec = CanonicalThetaSpec::<f64>::tacs(&chart, epsilon)?;
    let s = spec.structure("tacs", chart.clone())?;
    let layout = darboux_of(&chart)?.clone();
    let kappa = layout.kappa.ok_or(Error::NoDarbouxLayout)?;
    let at = ChartPoint::from_f64(chart.clone(), point)?;
    let x = at.values();
    let dim = chart.dimension();
    let theta = s.theta_at(x);
    let unit = |i: usize, c: f64| {
        let mut v = vec![0.0; dim];
        v[i] = c;
        v
    };
    let add = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(u, v)| u + v).collect::<Vec<_>>();
    let mut rows = Vec::new();
    let mut push = |name: String, f: usize, corrected: Vec<f64>, albert: Vec<f64>| -> Result<()> {
        let h = ScalarField::coordinate(f);
        let generic = hamiltonian_field_generic(&s, &h, &at)?;
        let dot = |v: &[f64]| v.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>();
        let dist = |v: &[f64]| v.iter().zip(&generic).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        rows.push(AlbertRow {
            function: name,
            corrected_residual: dist(&corrected),
            albert_residual: dist(&albert),
            contraction_generic: dot(&generic) + x[f],
            contraction_albert: dot(&albert) - epsilon * x[f],
            generic,
            corrected,
            albert,
        });
        Ok(())
    };
    for i in 0..layout.n() {
        let (q, p) = (layout.q[i], layout.p[i]);
        push(
            format!("{}", chart.coordinates()[q]),
            q,
            add(unit(p, -1.0), unit(kappa, -x[q])),
            add(unit(p, -1.0), unit(kappa, epsilon * x[q])),
        )?;
        push(
            format!("{}", chart.coordinates()[p]),
            p,
            add(unit(q, 1.0), unit(kappa, -(epsilon + 1.0) * x[p])),
            unit(q, 1.0),
        )?;
    }
    let mut corrected = unit(kappa, -x[kappa]);
    let mut albert = unit(kappa, epsilon * x[kappa]);
    for &p in &layout.p {
        corrected[p] = epsilon * x[p];
        albert[p] = epsilon * x[p];
    }
    push(chart.coordinates()[kappa].clone(), kappa, corrected, albert)?;
    Ok(rows)
}

/// Source text of a field over `chart`, or `<opaque>`.
pub fn field_source<T: Real>(h: &ScalarField<T>, chart: &Chart) -> String {
    h.expr().map_or_else(|| "<opaque>".to_string(), |e| e.to_source(chart.coordinates()))
}

/// Integrates `velocity` and records `H` and the dissipation residual
/// `|dH/dt + H R(H)|` with `R` from `reeb`.
pub fn integrate_monitored<T, F, R>(
    chart: &Arc<Chart>,
    velocity: F,
    reeb: R,
    h: &ScalarField<T>,
    x0: &ChartPoint<T>,
    opts: &IntegrationOptions,
    metadata: RunMetadata,
) -> Result<Trajectory<T>>
where
    T: Real,
    F: Fn(&[T]) -> Result<Vec<T>>,
    R: Fn(&[T]) -> Result<Vec<T>>,
{
    let path = integrate_field(chart, velocity, x0, opts)?;
    let mut hv = Vec::with_capacity(path.states.len());
    let mut hr = Vec::with_capacity(path.states.len());
    for p in &path.states {
        let x = p.values();
        let v = h.eval(x);
        hv.push(v);
        hr.push(v * directional(&reeb(x)?, h, x));
    }
    Ok(Trajectory::from_path(chart.coordinates().to_vec(), path, hv, hr, metadata))
}

/// Flow of the generic Hamiltonian field of `s`.
pub fn integrate<T: Real>(
    s: &StructureSpec<T>,
    h: &ScalarField<T>,
    x0: &ChartPoint<T>,
    opts: &IntegrationOptions,
) -> Result<Trajectory<T>> {
    let metadata = RunMetadata {
        structure: s.name().to_string(),
        parameters: s.parameters().clone(),
        hamiltonian: field_source(h, s.chart()),
        method: opts.method,
        dt: opts.dt,
        t_end: opts.t_end,
        abs_tol: opts.abs_tol,
        rel_tol: opts.rel_tol,
    };
    integrate_monitored(
        s.chart(),
        |x: &[T]| hamiltonian_field_raw(s, h, x),
        |x: &[T]| s.reeb_raw(x),
        h,
        x0,
        opts,
        metadata,
    )
}
