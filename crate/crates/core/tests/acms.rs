use std::collections::BTreeMap;
use std::sync::Arc;

use cosym::almost_contact::*;
use cosym::manifolds::{xjt_chart, ModelParameters};
use cosym::{Chart, ChartPoint, ScalarField};
use nalgebra::DMatrix;
use rand::{rngs::StdRng, Rng, SeedableRng};

fn at(v: &[f64]) -> ChartPoint<f64> {
    ChartPoint::from_f64(xjt_chart(), v).unwrap()
}

/// `(Φ_xy s − Φ_xq t)² = 4Φ_xq²(ζ s Φ_xq − 1 − Φ_pq Φ_qp)` with
/// `s = Φ_yp − Φ_yq`, `t = Φ_pq − Φ_qp`, obtained by eliminating Φ_qq.
fn closed_form_residual(sol: &AcmsSolution) -> f64 {
    let f = |i, j| sol.phi.get(i, j);
    let (xy, xq) = (f(0, 1), f(0, 2));
    let s = sol.free.yp - sol.free.yq;
    let t = sol.free.pq - sol.free.qp;
    let lhs = (xy * s - xq * t).powi(2);
    let rhs = 4.0 * xq * xq * (sol.phi.zeta * s * xq - 1.0 - sol.free.pq * sol.free.qp);
    (lhs - rhs).abs() / lhs.abs().max(1.0)
}

#[test]
fn reference_solve() {
    let p = ModelParameters::new(1.0, 1.0, 1.0);
    let sol = solve_phi(FreeComponents::new(1.0, 0.5, 0.3, -0.2), &p, &at(&[0.0, 1.0, 0.1, 0.2, 0.0]), &PhiSolverOptions::default()).unwrap();
    assert!(sol.reduced_residual() <= 1e-10, "{:?}", sol.residuals);
    assert!(sol.axiom_residual() <= 1e-10, "{:?}", sol.residuals);
    assert!(sol.residuals["phi_xi"] <= 1e-12 && sol.residuals["eta_phi"] <= 1e-12);
    assert_eq!(sol.rank, 4);
    assert!(sol.residuals["g_symmetry"] <= 1e-12);
    assert!(closed_form_residual(&sol) <= 1e-9);
    assert_eq!(sol.phi.get(0, 2), sol.phi.get(0, 3));
    for i in 0..5 {
        assert_eq!(sol.phi.get(i, 4), 0.0);
    }
}

#[test]
fn symmetry_relations_follow_from_g_symmetry() {
    let p = ModelParameters::new(1.3, 0.8, 2.0);
    let sol = solve_phi(FreeComponents::new(0.7, -0.4, 0.9, 0.1), &p, &at(&[0.2, 1.5, -0.3, 0.4, 0.0]), &PhiSolverOptions::default()).unwrap();
    // Independent check: η⊗η − Φ̂Φ is symmetric exactly when the relations hold.
    let h = sol.phi.phi_hat();
    let prod = &h * &sol.phi.entries;
    assert!((&prod - prod.transpose()).abs().max() <= 1e-12);
    let f = |i, j| sol.phi.get(i, j);
    let z = sol.phi.zeta;
    assert!((f(1, 1) + f(0, 0)).abs() <= 1e-12);
    assert!((f(2, 0) + z * f(1, 3)).abs() <= 1e-12);
    assert!((f(2, 1) - z * f(0, 3)).abs() <= 1e-12);
    assert!((f(3, 0) - z * f(1, 2)).abs() <= 1e-12);
    assert!((f(3, 3) + f(2, 2)).abs() <= 1e-12);
    assert!((f(3, 1) + z * f(0, 2)).abs() <= 1e-12);
}

#[test]
fn printed_g_prime_differs_in_two_entries() {
    let p = ModelParameters::new(1.0, 1.0, 1.0);
    let point = at(&[0.0, 1.0, 0.1, 0.2, 0.0]);
    let sol = solve_phi(FreeComponents::new(1.0, 0.5, 0.3, -0.2), &p, &point, &PhiSolverOptions::default()).unwrap();
    let d = g_prime_discrepancies(&sol, &p, &point).unwrap();
    let names: Vec<_> = d.iter().map(|e| e.entry.as_str()).collect();
    assert_eq!(names, ["g_xx", "g_qp"]);
}

#[test]
fn solver_across_points_and_seeds() {
    let mut rng = StdRng::seed_from_u64(42);
    let p = ModelParameters::new(1.0, 1.0, 1.0);
    for _ in 0..10 {
        let point = at(&[rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0]);
        let mut ok = 0;
        for _ in 0..12 {
            let free = FreeComponents::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if let Ok(sol) = solve_phi(free, &p, &point, &PhiSolverOptions::default()) {
                assert!(sol.axiom_residual() <= 1e-10 && sol.rank == 4, "{:?}", sol.residuals);
                ok += 1;
            }
        }
        assert!(ok >= 5);
    }
}

#[test]
fn negative_witness() {
    let w = |k: f64, y: f64| ppp_negative_witness(&ModelParameters::new(k, 1.0, 1.0), &at(&[0.3, y, 0.1, 0.2, 0.0])).unwrap();
    assert!((w(1.0, 1.0) - 2.0).abs() <= 1e-15);
    assert!((w(3.0, 2.0) - 3.0).abs() <= 1e-15);
    for i in 1..50 {
        assert!(w(0.5, i as f64 * 0.1) > 0.0);
    }
}

fn heisenberg() -> SasakiPotential {
    let chart = Chart::new("h", &["x", "y", "kappa"]);
    SasakiPotential::new(ScalarField::parse("-y^2/2", &chart, &BTreeMap::new()).unwrap(), 1).unwrap()
}

#[test]
fn heisenberg_sasaki() {
    let pot = heisenberg();
    let x = [0.4, -1.3, 2.0];
    let s = sasaki_from_potential(&pot, &x).unwrap();
    let y = x[1];
    assert_eq!(s.eta, vec![-y, 0.0, 1.0]);
    let want_g = DMatrix::from_row_slice(3, 3, &[1.0 + y * y, 0.0, -y, 0.0, 1.0, 0.0, -y, 0.0, 1.0]);
    assert!((&s.g - want_g).abs().max() <= 1e-12);
    let want_phi = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, y, 0.0]);
    assert!((&s.phi - want_phi).abs().max() <= 1e-12);
    for (k, v) in sasaki_axiom_residuals(&s) {
        assert!(v <= 1e-12, "{k}: {v}");
    }
    let fields = pot.fields();
    assert!(nijenhuis_n1(&fields, &x, NijenhuisConvention::Factor1) <= 1e-8);
    assert!((nijenhuis_n1(&fields, &x, NijenhuisConvention::Factor2) - 1.0).abs() <= 1e-6);
}

#[test]
fn nijenhuis_toy_and_perturbation() {
    let toy = AlmostContactFields::new(
        |_| DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        |_| vec![0.0, 0.0, 1.0],
        |_| vec![0.0, 0.0, 1.0],
    );
    assert!(nijenhuis_n1(&toy, &[0.1, 0.2, 0.3], NijenhuisConvention::Factor2) == 0.0);
    let base = heisenberg().fields();
    let phi = Arc::clone(&base.phi);
    let perturbed = AlmostContactFields {
        phi: Arc::new(move |x: &[f64]| {
            let mut m = phi(x);
            m[(1, 0)] += 0.1;
            m
        }),
        ..base
    };
    assert!(nijenhuis_n1(&perturbed, &[0.4, -1.3, 2.0], NijenhuisConvention::Factor1) > 1e-3);
}

#[test]
fn potential_fit_is_reported() {
    let p = ModelParameters::new(1.0, 1.0, 1.0);
    let pts: Vec<_> = xjt_chart().probe_points::<f64>(16);
    let r = potential_fit_report(&p, &pts).unwrap();
    assert_eq!(r.points, 16);
    assert!(r.eta_residual.is_finite() && r.metric_residual.is_finite());
}
