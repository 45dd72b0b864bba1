//! Almost contact metric structures on the extended half-plane: the Φ
//! solver, the obstruction for the invariant metric, Nijenhuis normality
//! and metrics generated by a Sasaki potential.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::chart::ChartPoint;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::manifolds::{metric_case_chart, metric_matrix, xjt_chart, ModelParameters};

/// Coordinate order `(x, y, q, p, κ)`.
pub const XJT_INDEX: [&str; 5] = ["x", "y", "q", "p", "kappa"];
const X: usize = 0;
const Y: usize = 1;
const Q: usize = 2;
const P: usize = 3;
const K: usize = 4;

/// Free components `(Φ_yq, Φ_yp, Φ_qp, Φ_pq)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeComponents {
    pub yq: f64,
    pub yp: f64,
    pub qp: f64,
    pub pq: f64,
}

impl FreeComponents {
    pub fn new(yq: f64, yp: f64, qp: f64, pq: f64) -> Self {
        FreeComponents { yq, yp, qp, pq }
    }
}

/// `(1,1)` tensor with `entries[(i, j)] = Φ^i_j`, rows and columns in
/// [`XJT_INDEX`] order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiTensor {
    #[serde(serialize_with = "rows")]
    pub entries: DMatrix<f64>,
    pub tau: f64,
    pub sigma: f64,
    pub zeta: f64,
}

impl PhiTensor {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Completes Φ from the ten independent components: the symmetry
    /// relations fill rows `q, p, y`, the last column vanishes and the
    /// last row enforces `ηΦ = 0`.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        xx: f64,
        xy: f64,
        xq: f64,
        xp: f64,
        yx: f64,
        qq: f64,
        free: FreeComponents,
        params: &ModelParameters,
        y: f64,
        q: f64,
        p: f64,
    ) -> PhiTensor {
        let tau = params.k / (y * y);
        let sigma = 2.0 * params.nu;
        let zeta = tau / sigma;
        let mut m = DMatrix::zeros(5, 5);
        let rows = [
            [xx, xy, xq, xp],
            [yx, -xx, free.yq, free.yp],
            [-zeta * free.yp, zeta * xp, qq, free.qp],
            [zeta * free.yq, -zeta * xq, free.pq, -qq],
        ];
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        let eta = contact_eta(params, y, q, p);
        for j in 0..4 {
            m[(K, j)] = -(eta[X] * m[(X, j)] + eta[Q] * m[(Q, j)] + eta[P] * m[(P, j)]) / eta[K];
        }
        PhiTensor { entries: m, tau, sigma, zeta }
    }

    /// `Φ̂` of `dη₀`: `Φ̂_xy = τ`, `Φ̂_qp = σ`, antisymmetric.
    pub fn phi_hat(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(5, 5);
        h[(X, Y)] = self.tau;
        h[(Y, X)] = -self.tau;
        h[(Q, P)] = self.sigma;
        h[(P, Q)] = -self.sigma;
        h
    }
}

/// Matrices serialize as a list of rows.
pub fn rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_rows(m).serialize(s)
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `η₀ = (k/y, 0, −νp, νq, √δ)`.
pub fn contact_eta(params: &ModelParameters, y: f64, q: f64, p: f64) -> [f64; 5] {
    [params.k / y, 0.0, -params.nu * p, params.nu * q, params.delta.sqrt()]
}

/// `ξ = (0, 0, 0, 0, 1/√δ)`.
pub fn contact_xi(params: &ModelParameters) -> [f64; 5] {
    [0.0, 0.0, 0.0, 0.0, 1.0 / params.delta.sqrt()]
}

/// A solution of the almost contact metric equations for `η₀`.
#[derive(Debug, Clone, Serialize)]
pub struct AcmsSolution {
    pub free: FreeComponents,
    pub phi: PhiTensor,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    /// `η⊗η − Φ̂Φ`.
    #[serde(serialize_with = "rows")]
    pub g_prime: DMatrix<f64>,
    pub residuals: BTreeMap<String, f64>,
    pub rank: usize,
    pub min_eigenvalue: f64,
    pub positive_definite: bool,
    pub starts_converged: usize,
}

impl AcmsSolution {
    /// Largest of `|Φ² + I − ξ⊗η|`, `|ηΦ|`, `|Φξ|`.
    pub fn axiom_residual(&self) -> f64 {
        ["phi_squared", "eta_phi", "phi_xi"].iter().map(|k| self.residuals[*k]).fold(0.0, f64::max)
    }

    /// Largest residual of the six reduced equations.
    pub fn reduced_residual(&self) -> f64 {
        ["612a", "612b", "612c", "612d", "612e", "612f"].iter().map(|k| self.residuals[*k]).fold(0.0, f64::max)
    }
}

/// Options for [`solve_phi`].
#[derive(Debug, Clone, Copy)]
pub struct PhiSolverOptions {
    /// Starts per axis on `[-span, span]²`.
    pub grid: usize,
    pub span: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Branches with `|Φ_xq|` or `|Φ_xy|` below this are rejected.
    pub branch_floor: f64,
}

impl Default for PhiSolverOptions {
    fn default() -> Self {
        PhiSolverOptions { grid: 4, span: 3.0, max_iterations: 200, tolerance: 1e-14, branch_floor: 1e-8 }
    }
}

struct Reduced {
    zeta: f64,
    free: FreeComponents,
}

impl Reduced {
    /// `(Φ_xx, Φ_yx, Φ_qq)` on the branch `Φ_xp = Φ_xq`.
    fn chain(&self, xy: f64, xq: f64) -> (f64, f64, f64) {
        let f = self.free;
        let xx = -0.5 / xq * (xy * (f.yq + f.yp) + xq * (f.pq + f.qp));
        let qq = 0.5 / xq * (xy * (f.yp - f.yq) + xq * (f.qp - f.pq));
        let yx = -(f.yq * (xy * f.yp + xq * f.qp) + f.yp * f.pq * xq) / (xq * xq);
        (xx, yx, qq)
    }

    fn residual(&self, u: [f64; 2]) -> [f64; 2] {
        let [xy, xq] = u;
        let (xx, yx, qq) = self.chain(xy, xq);
        let s = self.zeta * xq * (self.free.yq - self.free.yp) + 1.0;
        [xx * xx + s + xy * yx, qq * qq + s + self.free.qp * self.free.pq]
    }

    fn jacobian(&self, u: [f64; 2]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(2, 2);
        for c in 0..2 {
            let h = 1e-6 * u[c].abs().max(1.0);
            let mut a = u;
            let mut b = u;
            a[c] += h;
            b[c] -= h;
            let (ra, rb) = (self.residual(a), self.residual(b));
            for r in 0..2 {
                j[(r, c)] = (ra[r] - rb[r]) / (2.0 * h);
            }
        }
        j
    }

    /// Damped minimum-norm Newton; the two equations coincide on this
    /// branch, so the Jacobian has rank one.
    fn newton(&self, start: [f64; 2], opts: &PhiSolverOptions) -> Option<[f64; 2]> {
        let norm = |r: [f64; 2]| r[0].hypot(r[1]);
        let mut u = start;
        let mut r = self.residual(u);
        for _ in 0..opts.max_iterations {
            if !norm(r).is_finite() {
                return None;
            }
            if norm(r) <= opts.tolerance {
                return Some(self.polish(u));
            }
            let j = self.jacobian(u);
            let step = j.pseudo_inverse(1e-12).ok()? * DVector::from_vec(vec![-r[0], -r[1]]);
            let mut lambda = 1.0;
            loop {
                let cand = [u[0] + lambda * step[0], u[1] + lambda * step[1]];
                let rc = self.residual(cand);
                if norm(rc).is_finite() && norm(rc) < norm(r) {
                    u = cand;
                    r = rc;
                    break;
                }
                lambda *= 0.5;
                if lambda < 1e-10 {
                    return (norm(r) <= 1e3 * opts.tolerance).then_some(u);
                }
            }
        }
        (norm(r) <= 1e3 * opts.tolerance).then_some(u)
    }

    /// Full Newton steps while the residual keeps dropping.
    fn polish(&self, mut u: [f64; 2]) -> [f64; 2] {
        let norm = |r: [f64; 2]| r[0].hypot(r[1]);
        let mut r = norm(self.residual(u));
        for _ in 0..4 {
            let rv = self.residual(u);
            let Ok(pinv) = self.jacobian(u).pseudo_inverse(1e-12) else { break };
            let step = pinv * DVector::from_vec(vec![-rv[0], -rv[1]]);
            let cand = [u[0] + step[0], u[1] + step[1]];
            let rc = norm(self.residual(cand));
            if !(rc < r) {
                break;
            }
            u = cand;
            r = rc;
        }
        u
    }
}

fn xjt_values(at: &ChartPoint<f64>) -> Result<(f64, f64, f64)> {
    at.require_chart(&xjt_chart())?;
    let v = at.values();
    Ok((v[Y], v[Q], v[P]))
}

/// Solves for `(Φ_xy, Φ_xq)` given the free components, then completes Φ,
/// `g′` and the residual table. Among converged starts a positive definite
/// `g′` is preferred, then the smallest axiom residual.
pub fn solve_phi(
    free: FreeComponents,
    params: &ModelParameters,
    at: &ChartPoint<f64>,
    opts: &PhiSolverOptions,
) -> Result<AcmsSolution> {
    params.validate()?;
    let (y, q, p) = xjt_values(at)?;
    let zeta = params.k / (y * y) / (2.0 * params.nu);
    let red = Reduced { zeta, free };
    let mut best: Option<AcmsSolution> = None;
    let mut best_residual = f64::INFINITY;
    let mut converged = 0;
    let n = opts.grid.max(1);
    for a in 0..n {
        for b in 0..n {
            let t = |i: usize| if n == 1 { 0.0 } else { -opts.span + 2.0 * opts.span * i as f64 / (n - 1) as f64 };
            let Some([xy, xq]) = red.newton([t(a), t(b)], opts) else { continue };
            if xq.abs() < opts.branch_floor || xy.abs() < opts.branch_floor {
                continue;
            }
            converged += 1;
            let (xx, yx, qq) = red.chain(xy, xq);
            let phi = PhiTensor::assemble(xx, xy, xq, xq, yx, qq, free, params, y, q, p);
            let sol = complete(phi, free, params, y, q, p);
            let better = match &best {
                None => true,
                Some(b) if sol.positive_definite != b.positive_definite => sol.positive_definite,
                Some(_) => sol.axiom_residual() < best_residual,
            };
            if better {
                best_residual = sol.axiom_residual();
                best = Some(sol);
            }
        }
    }
    match best {
        Some(mut s) => {
            s.starts_converged = converged;
            Ok(s)
        }
        None => Err(Error::Solver(format!(
            "no start converged to a branch with Φ_xq ≠ 0 and Φ_xy ≠ 0 (best axiom residual {:.3e})",
            best_residual
        ))),
    }
}

fn complete(phi: PhiTensor, free: FreeComponents, params: &ModelParameters, y: f64, q: f64, p: f64) -> AcmsSolution {
    let eta = DVector::from_row_slice(&contact_eta(params, y, q, p));
    let xi = DVector::from_row_slice(&contact_xi(params));
    let m = &phi.entries;
    let g = &eta * eta.transpose() - phi.phi_hat() * m;
    let mut residuals = BTreeMap::new();
    let max = |d: DMatrix<f64>| d.abs().max();
    residuals.insert("phi_squared".into(), max(m * m + DMatrix::identity(5, 5) - &xi * eta.transpose()));
    residuals.insert("eta_phi".into(), max((eta.transpose() * m).into_owned().reshape_generic(nalgebra::Dyn(1), nalgebra::Dyn(5))));
    residuals.insert("phi_xi".into(), (m * &xi).abs().max());
    residuals.insert("eta_xi".into(), (eta.dot(&xi) - 1.0).abs());
    residuals.insert("g_symmetry".into(), max(&g - g.transpose()));
    residuals.insert("eta_g_xi".into(), (&g * &xi - &eta).abs().max());
    for (name, r) in reduced_equations(&phi) {
        residuals.insert(name.into(), r.abs());
    }
    let sym = (&g + g.transpose()) * 0.5;
    let min_eigenvalue = sym.clone().symmetric_eigenvalues().min();
    let positive_definite = sym.cholesky().is_some() && min_eigenvalue > 0.0;
    AcmsSolution {
        free,
        rank: numerical_rank(m),
        xi: xi.iter().copied().collect(),
        eta: eta.iter().copied().collect(),
        phi,
        g_prime: g,
        residuals,
        min_eigenvalue,
        positive_definite,
        starts_converged: 0,
    }
}

/// The six reduced equations written as `lhs − rhs`.
pub fn reduced_equations(phi: &PhiTensor) -> [(&'static str, f64); 6] {
    let f = |i, j| phi.get(i, j);
    let z = phi.zeta;
    let (xx, xy, xq, xp, yx, yq, yp, qq, qp, pq) =
        (f(X, X), f(X, Y), f(X, Q), f(X, P), f(Y, X), f(Y, Q), f(Y, P), f(Q, Q), f(Q, P), f(P, Q));
    [
        ("612a", xx * xx + xy * yx + z * (xp * yq - xq * yp) + 1.0),
        ("612b", xq * (xx + qq) + xy * yq + xp * pq),
        ("612c", xp * (xx - qq) + xy * yp + xq * qp),
        ("612d", yq * (qq - xx) + yx * xq + yp * pq),
        ("612e", -yp * (xx + qq) + yx * xp + yq * qp),
        ("612f", z * (xp * yq - yp * xq) + qq * qq + qp * pq + 1.0),
    ]
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let top = sv.max();
    sv.iter().filter(|&&s| s > top * 1e-10).count()
}

/// The printed quadratic form of `g′`, upper triangle mirrored.
pub fn g_prime_printed(phi: &PhiTensor, params: &ModelParameters, y: f64, q: f64, p: f64) -> DMatrix<f64> {
    let f = |i, j| phi.get(i, j);
    let (k, nu, sd) = (params.k, params.nu, params.delta.sqrt());
    let (t, s) = (phi.tau, phi.sigma);
    let upper = [
        [k * k / (y * y) - t * f(X, X), -t * f(Y, Y), -nu * k * p / y - t * f(Y, Q), nu * k * q / y - t * f(Y, P), k * sd / y],
        [0.0, t * f(X, Y), t * f(X, Q), t * f(X, P), 0.0],
        [0.0, 0.0, nu * nu * p * p - s * f(P, Q), -nu * nu * p * q - s * f(Q, Q), -nu * sd * p],
        [0.0, 0.0, 0.0, nu * nu * q * q + s * f(Q, P), nu * sd * q],
        [0.0, 0.0, 0.0, 0.0, params.delta],
    ];
    DMatrix::from_fn(5, 5, |i, j| if i <= j { upper[i][j] } else { upper[j][i] })
}

/// One entry where the printed `g′` differs from `η⊗η − Φ̂Φ`.
#[derive(Debug, Clone, Serialize)]
pub struct GPrimeDiscrepancy {
    pub entry: String,
    pub printed: f64,
    pub assembled: f64,
}

/// Entries of the printed `g′` that disagree with the assembled one.
pub fn g_prime_discrepancies(sol: &AcmsSolution, params: &ModelParameters, at: &ChartPoint<f64>) -> Result<Vec<GPrimeDiscrepancy>> {
    let (y, q, p) = xjt_values(at)?;
    let printed = g_prime_printed(&sol.phi, params, y, q, p);
    let mut out = Vec::new();
    for i in 0..5 {
        for j in i..5 {
            let (a, b) = (printed[(i, j)], sol.g_prime[(i, j)]);
            if (a - b).abs() > 1e-12 * b.abs().max(1.0) {
                out.push(GPrimeDiscrepancy { entry: format!("g_{}{}", XJT_INDEX[i], XJT_INDEX[j]), printed: a, assembled: b });
            }
        }
    }
    Ok(out)
}

/// `kτ/(y g_xx)` with `g_xx` from the invariant metric; its nonvanishing
/// rules out Φ for `η₀` with that metric.
pub fn ppp_negative_witness(params: &ModelParameters, at: &ChartPoint<f64>) -> Result<f64> {
    params.validate()?;
    let (y, q, p) = xjt_values(at)?;
    let v = at.values();
    let point = ChartPoint::new(metric_case_chart(4)?, vec![v[X], y, p, q, v[K]])?;
    let g = metric_matrix(4, params, &point)?;
    let tau = params.k / (y * y);
    Ok(params.k * tau / (y * g[(0, 0)]))
}

/// Normalization of the `dη⊗ξ` term in `N¹ = [Φ,Φ] + c dη⊗ξ`, with
/// `dη(∂_i, ∂_j) = ∂_iη_j − ∂_jη_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NijenhuisConvention {
    Factor2,
    Factor1,
}

impl NijenhuisConvention {
    fn factor(self) -> f64 {
        match self {
            NijenhuisConvention::Factor2 => 2.0,
            NijenhuisConvention::Factor1 => 1.0,
        }
    }
}

type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// `(Φ, ξ, η)` as functions of raw coordinates.
#[derive(Clone)]
pub struct AlmostContactFields {
    pub phi: MatrixFn,
    pub xi: VectorFn,
    pub eta: VectorFn,
}

impl AlmostContactFields {
    pub fn new(
        phi: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        xi: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        eta: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        AlmostContactFields { phi: Arc::new(phi), xi: Arc::new(xi), eta: Arc::new(eta) }
    }
}

fn fd_matrix(f: &MatrixFn, x: &[f64], i: usize) -> DMatrix<f64> {
    let h = 1e-5 * x[i].abs().max(1.0);
    let (mut a, mut b) = (x.to_vec(), x.to_vec());
    a[i] += h;
    b[i] -= h;
    (f(&a) - f(&b)) / (2.0 * h)
}

fn fd_vector(f: &VectorFn, x: &[f64], i: usize) -> Vec<f64> {
    let h = 1e-5 * x[i].abs().max(1.0);
    let (mut a, mut b) = (x.to_vec(), x.to_vec());
    a[i] += h;
    b[i] -= h;
    f(&a).iter().zip(f(&b)).map(|(u, v)| (u - v) / (2.0 * h)).collect()
}

/// Max norm of `N¹(∂_i, ∂_j)` over coordinate pairs, with derivatives of
/// Φ and η by central differences.
pub fn nijenhuis_n1(fields: &AlmostContactFields, x: &[f64], convention: NijenhuisConvention) -> f64 {
    let n = x.len();
    let phi = (fields.phi)(x);
    let xi = (fields.xi)(x);
    let dphi: Vec<DMatrix<f64>> = (0..n).map(|i| fd_matrix(&fields.phi, x, i)).collect();
    let deta: Vec<Vec<f64>> = (0..n).map(|i| fd_vector(&fields.eta, x, i)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let vi = phi.column(i);
            let vj = phi.column(j);
            let mut out = DVector::<f64>::zeros(n);
            for a in 0..n {
                let mut bracket = 0.0;
                for b in 0..n {
                    bracket += vi[b] * dphi[b][(a, j)] - vj[b] * dphi[b][(a, i)];
                }
                out[a] = bracket;
            }
            let dvj = DVector::from_fn(n, |a, _| dphi[i][(a, j)]);
            let dvi = DVector::from_fn(n, |a, _| dphi[j][(a, i)]);
            out += &phi * dvi - &phi * dvj;
            let d_eta_ij = deta[i][j] - deta[j][i];
            for a in 0..n {
                out[a] += convention.factor() * d_eta_ij * xi[a];
            }
            worst = worst.max(out.abs().max());
        }
    }
    worst
}

/// A κ-independent potential over `(x_1, y_1, …, x_n, y_n, κ)`.
#[derive(Debug, Clone)]
pub struct SasakiPotential {
    pub k: ScalarField<f64>,
    pub n: usize,
}

/// Output of [`sasaki_from_potential`] at a point.
#[derive(Debug, Clone, Serialize)]
pub struct SasakiStructure {
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    /// `dη(∂_i, ∂_j)`.
    #[serde(serialize_with = "rows")]
    pub d_eta: DMatrix<f64>,
    #[serde(serialize_with = "rows")]
    pub g: DMatrix<f64>,
    #[serde(serialize_with = "rows")]
    pub phi: DMatrix<f64>,
}

impl SasakiPotential {
    pub fn new(k: ScalarField<f64>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameters("potential needs n >= 1".into()));
        }
        Ok(SasakiPotential { k, n })
    }

    /// Structure fields as functions of the point, for [`nijenhuis_n1`].
    pub fn fields(&self) -> AlmostContactFields {
        let (a, b, c) = (self.clone(), self.clone(), self.clone());
        AlmostContactFields::new(
            move |x| sasaki_from_potential(&a, x).map(|s| s.phi).unwrap_or_else(|_| DMatrix::from_element(x.len(), x.len(), f64::NAN)),
            move |x| sasaki_from_potential(&b, x).map(|s| s.xi).unwrap_or_else(|_| vec![f64::NAN; x.len()]),
            move |x| sasaki_from_potential(&c, x).map(|s| s.eta).unwrap_or_else(|_| vec![f64::NAN; x.len()]),
        )
    }

    /// `K_{j k̄} = ¼[(K_{x_j x_k} + K_{y_j y_k}) + i(K_{x_j y_k} − K_{y_j x_k})]`.
    pub fn levi_form(&self, x: &[f64]) -> DMatrix<Complex64> {
        let d2 = |a: usize, b: usize| self.k.partial(a).partial_at(b, x);
        DMatrix::from_fn(self.n, self.n, |j, k| {
            let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
            Complex64::new(d2(xj, xk) + d2(yj, yk), d2(xj, yk) - d2(yj, xk)) * 0.25
        })
    }
}

/// `ξ = ∂_κ`, `η = dκ + Σ (K_{y_j} dx_j − K_{x_j} dy_j)`,
/// `g = η⊗η − 4 Re Σ K_{j k̄} dz^j ⊗ dz̄^k`, and Φ the horizontal lift of
/// `J ∂_x = −∂_y`, `J ∂_y = ∂_x`.
pub fn sasaki_from_potential(pot: &SasakiPotential, x: &[f64]) -> Result<SasakiStructure> {
    let n = pot.n;
    let dim = 2 * n + 1;
    if x.len() != dim {
        return Err(Error::PointLength { chart: "sasaki".into(), expected: dim, found: x.len() });
    }
    let kap = 2 * n;
    let grad = pot.k.gradient_at(x);
    if grad[kap] != 0.0 || pot.k.partial(kap).partial_at(kap, x) != 0.0 {
        return Err(Error::InvalidParameters("Sasaki potential depends on κ".into()));
    }
    let mut eta = vec![0.0; dim];
    eta[kap] = 1.0;
    for j in 0..n {
        eta[2 * j] = grad[2 * j + 1];
        eta[2 * j + 1] = -grad[2 * j];
    }
    let levi = pot.levi_form(x);
    if levi.map(|c| c.norm()).max() == 0.0 {
        return Err(Error::Degenerate("Levi form of the potential vanishes".into()));
    }
    let dz = |j: usize, a: usize| -> Complex64 {
        if a == 2 * j {
            Complex64::new(1.0, 0.0)
        } else if a == 2 * j + 1 {
            Complex64::new(0.0, 1.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let eta_v = DVector::from_vec(eta.clone());
    let mut g = &eta_v * eta_v.transpose();
    for a in 0..dim {
        for b in 0..dim {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..n {
                for k in 0..n {
                    s += levi[(j, k)] * dz(j, a) * dz(k, b).conj();
                }
            }
            g[(a, b)] += -4.0 * s.re;
        }
    }
    let mut phi = DMatrix::zeros(dim, dim);
    for j in 0..n {
        let (xj, yj) = (2 * j, 2 * j + 1);
        phi[(yj, xj)] = -1.0;
        phi[(kap, xj)] = eta[yj];
        phi[(xj, yj)] = 1.0;
        phi[(kap, yj)] = -eta[xj];
    }
    let hess = |a: usize, b: usize| pot.k.partial(a).partial_at(b, x);
    let mut d_eta = DMatrix::zeros(dim, dim);
    let deta_partial = |a: usize, c: usize| -> f64 {
        // ∂_a η_c
        if c == kap {
            return 0.0;
        }
        let j = c / 2;
        if c % 2 == 0 {
            hess(a, 2 * j + 1)
        } else {
            -hess(a, 2 * j)
        }
    };
    for a in 0..dim {
        for b in 0..dim {
            d_eta[(a, b)] = deta_partial(a, b) - deta_partial(b, a);
        }
    }
    let mut xi = vec![0.0; dim];
    xi[kap] = 1.0;
    Ok(SasakiStructure { xi, eta, d_eta, g, phi })
}

/// Residuals of the almost contact metric axioms for a Sasaki output.
pub fn sasaki_axiom_residuals(s: &SasakiStructure) -> BTreeMap<String, f64> {
    let dim = s.eta.len();
    let eta = DVector::from_vec(s.eta.clone());
    let xi = DVector::from_vec(s.xi.clone());
    let phi = &s.phi;
    let g = &s.g;
    let mut r = BTreeMap::new();
    r.insert("eta_xi".into(), (eta.dot(&xi) - 1.0).abs());
    r.insert("phi_xi".into(), (phi * &xi).abs().max());
    r.insert("eta_phi".into(), (eta.transpose() * phi).abs().max());
    r.insert("phi_squared".into(), (phi * phi + DMatrix::identity(dim, dim) - &xi * eta.transpose()).abs().max());
    r.insert("g_xi_eta".into(), (g * &xi - &eta).abs().max());
    r.insert("compatibility".into(), (phi.transpose() * g * phi - g + &eta * eta.transpose()).abs().max());
    let ghat = g * phi;
    r.insert("g_phi_antisymmetry".into(), (&ghat + ghat.transpose()).abs().max());
    r.insert("d_eta_vs_g_phi".into(), (&s.d_eta - &ghat).abs().max());
    r.insert("g_symmetry".into(), (g - g.transpose()).abs().max());
    r
}

/// Least-squares attempt to write the invariant metric (normalized so that
/// `g_κκ = 1`) in potential form over `z_1 = x + iy`, `z_2 = q + ip`.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialFitReport {
    pub basis: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Max residual of the η fit over the sample.
    pub eta_residual: f64,
    /// Max entrywise residual between the fitted potential metric and the
    /// target over the sample.
    pub metric_residual: f64,
    pub points: usize,
}

const FIT_BASIS: [&str; 16] = [
    "x", "y", "q", "p", "x^2", "y^2", "x*y", "q^2", "p^2", "q*p", "x*q", "x*p", "y*q", "y*p", "log(y)", "x^2*p^2 + y^2*p^2",
];

pub fn potential_fit_report(params: &ModelParameters, points: &[ChartPoint<f64>]) -> Result<PotentialFitReport> {
    if points.is_empty() {
        return Err(Error::EmptyProbes);
    }
    let chart = Arc::new(crate::chart::Chart::new("sasaki2", &["x", "y", "q", "p", "kappa"]));
    let basis: Vec<ScalarField<f64>> = FIT_BASIS
        .iter()
        .map(|s| ScalarField::parse(s, &chart, &BTreeMap::new()))
        .collect::<Result<_>>()?;
    let mut targets = Vec::new();
    for at in points {
        let (y, q, p) = xjt_values(at)?;
        let v = at.values();
        let pt = ChartPoint::new(metric_case_chart(4)?, vec![v[X], y, p, q, v[K]])?;
        let m = metric_matrix(4, params, &pt)?;
        // Reorder (x, y, p, q, κ) to (x, y, q, p, κ) and normalize.
        let order = [0usize, 1, 3, 2, 4];
        let d = m[(4, 4)];
        targets.push((v.to_vec(), DMatrix::from_fn(5, 5, |i, j| m[(order[i], order[j])] / d)));
    }
    // η_x = K_y, η_y = −K_x, η_q = K_p, η_p = −K_q, with η = g(·, ∂_κ).
    let rows = 4 * targets.len();
    let mut a = DMatrix::zeros(rows, basis.len());
    let mut b = DVector::zeros(rows);
    for (t, (x, g)) in targets.iter().enumerate() {
        for (c, f) in basis.iter().enumerate() {
            let gr = f.gradient_at(x);
            a[(4 * t, c)] = gr[1];
            a[(4 * t + 1, c)] = -gr[0];
            a[(4 * t + 2, c)] = gr[3];
            a[(4 * t + 3, c)] = -gr[2];
        }
        for r in 0..4 {
            b[4 * t + r] = g[(r, 4)];
        }
    }
    let coef = a.clone().svd(true, true).solve(&b, 1e-12).map_err(|e| Error::Solver(e.to_string()))?;
    let eta_residual = (&a * &coef - &b).abs().max();
    let k = basis.iter().zip(coef.iter()).fold(ScalarField::zero(), |acc, (f, &c)| acc + f.clone() * ScalarField::constant(c));
    let pot = SasakiPotential::new(k, 2)?;
    let mut metric_residual: f64 = 0.0;
    for (x, g) in &targets {
        match sasaki_from_potential(&pot, x) {
            Ok(s) => metric_residual = metric_residual.max((&s.g - g).abs().max()),
            Err(_) => metric_residual = f64::INFINITY,
        }
    }
    Ok(PotentialFitReport {
        basis: FIT_BASIS.iter().map(|s| s.to_string()).collect(),
        coefficients: coef.iter().copied().collect(),
        eta_residual,
        metric_residual,
        points: points.len(),
    })
}
