use std::collections::BTreeMap;

use cosym::integrate::{IntegrationOptions, Method};
use cosym::jacobi_flows::*;
use cosym::manifolds::{xjt_chart, ModelParameters};
use cosym::{ChartPoint, ScalarField};
use rand::{rngs::StdRng, Rng, SeedableRng};

fn at(v: &[f64]) -> ChartPoint<f64> {
    ChartPoint::from_f64(xjt_chart(), v).unwrap()
}

fn random_coeffs(rng: &mut StdRng) -> LinearHamiltonianCoefficients {
    LinearHamiltonianCoefficients::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    )
}

#[test]
fn energy_examples() {
    let p = ModelParameters::new(1.0, 1.0, 1.0);
    let c = LinearHamiltonianCoefficients::new(0.0, 0.0, 0.5, 0.5, 0.0);
    assert!((energy(&c, &p, 0.0, 1.0, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(energy(&LinearHamiltonianCoefficients::default(), &p, 0.3, 2.0, 1.0, -1.0).unwrap(), 0.0);
    assert!(energy(&c, &p, 0.0, 0.0, 0.0, 0.0).is_err());
    let mut rng = StdRng::seed_from_u64(42);
    for _ in 0..50 {
        let c = random_coeffs(&mut rng);
        let p = ModelParameters::new(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), 1.0);
        let v = [rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), 0.0];
        let split = SplitEnergy::new(&c, &p).unwrap();
        assert!(split_independence(&split));
        let direct = energy(&c, &p, v[0], v[1], v[3], v[2]).unwrap();
        assert!((split.total().eval(&v) - direct).abs() <= 1e-12 * direct.abs().max(1.0));
    }
}

#[test]
fn eom_examples() {
    let p = ModelParameters::new(1.0, 1.0, 1.0);
    let point = at(&[0.0, 1.0, 2.0, 3.0, 0.0]);
    // H = q through the a coefficient: H(q,p) = 2νa q with a = 1/2.
    let c = LinearHamiltonianCoefficients::new(0.5, 0.0, 0.0, 0.0, 0.0);
    let v = eom(&c, &p, Variant::Gtacos, &point).unwrap();
    let want = [0.0, 0.0, 0.0, -0.5, -1.0];
    for (a, b) in v.iter().zip(want) {
        assert!((a - b).abs() <= 1e-12, "{v:?}");
    }
    let zero = LinearHamiltonianCoefficients::default();
    for variant in [Variant::BaseXj1, Variant::Gtacos, Variant::Contact] {
        assert!(eom(&zero, &p, variant, &point).unwrap().iter().all(|x| x.abs() <= 1e-15));
    }
}

#[test]
fn gtacos_matches_base_and_kappa_formula() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..20 {
        let c = random_coeffs(&mut rng);
        let p = ModelParameters::new(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.5..3.0));
        let v = [rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let point = at(&v);
        let g = eom(&c, &p, Variant::Gtacos, &point).unwrap();
        let b = eom(&c, &p, Variant::BaseXj1, &point).unwrap();
        for i in 0..4 {
            assert!((g[i] - b[i]).abs() <= 1e-10 * b[i].abs().max(1.0));
        }
        let h = SplitEnergy::new(&c, &p).unwrap().total();
        let kdot = (v[3] * h.partial_at(3, &v) + v[2] * h.partial_at(2, &v)) / (2.0 * p.nu) - h.eval(&v) / p.delta.sqrt();
        assert!((g[4] - kdot).abs() <= 1e-10 * kdot.abs().max(1.0));
        let r = riccati_rhs(&c, v[0], v[1]).unwrap();
        assert!((r[0] - g[0]).abs() <= 1e-10 * r[0].abs().max(1.0));
        assert!((r[1] - g[1]).abs() <= 1e-10 * r[1].abs().max(1.0));
    }
}

#[test]
fn riccati_examples() {
    let c = LinearHamiltonianCoefficients::new(0.0, 0.0, 0.5, 0.5, 0.0);
    assert_eq!(riccati_rhs(&c, 0.0, 1.0).unwrap(), [1.0, 0.0]);
    let c = LinearHamiltonianCoefficients::new(0.0, 0.0, 0.0, 0.0, 1.0);
    assert_eq!(riccati_rhs(&c, 1.0, 1.0).unwrap(), [2.0, 2.0]);
    let c = LinearHamiltonianCoefficients::new(0.4, -0.3, 0.2, -0.2, 0.0);
    assert_eq!(riccati_rhs(&c, 1.7, 0.3).unwrap(), [0.0, 0.0]);
    assert!(riccati_rhs(&c, 0.0, -1.0).is_err());
}

#[test]
fn red_green_examples() {
    let p = ModelParameters::new(1.0, 1.0, 1.0);
    let c = LinearHamiltonianCoefficients::new(0.3, -0.2, 0.5, 0.4, 0.7);
    let point = at(&[0.0, 1.0, 1.0, 1.0, 0.0]);
    let rg = red_green_decomposition(&c, &p, Variant::Gtacos, &point).unwrap();
    assert!(rg.correction[..4].iter().all(|x| x.abs() <= 1e-12));
    let ck = c.clone().with_h_kappa("kappa");
    let rg = red_green_decomposition(&ck, &p, Variant::Gtacos, &point).unwrap();
    assert!((rg.correction[2] + 0.5).abs() <= 1e-12, "{:?}", rg.correction);
    let full = eom(&ck, &p, Variant::Gtacos, &point).unwrap();
    for i in 0..5 {
        let base = if i < 4 { rg.base[i] } else { 0.0 };
        assert!((base + rg.correction[i] - full[i]).abs() <= 1e-14);
    }
    let rg = red_green_decomposition(&c, &p, Variant::Contact, &point).unwrap();
    assert!(rg.correction[0].abs() <= 1e-12 && rg.correction[1].abs() <= 1e-12 && rg.correction[2].abs() <= 1e-12);
}

#[test]
fn riccati_trajectory_equivalence() {
    let p = ModelParameters::new(1.0, 1.0, 1.0);
    let c = LinearHamiltonianCoefficients::new(0.2, 0.1, 0.3, 0.4, -0.5);
    let opts = IntegrationOptions::new(1.0, 0.05, Method::AdaptiveRk45);
    let x0 = [0.2, 1.1, 0.3, -0.2, 0.0];
    let tr = integrate_eom(&c, &p, Variant::Gtacos, &x0, &opts).unwrap();
    let ric = integrate_riccati(&c, [x0[0], x0[1]], &opts).unwrap();
    assert_eq!(tr.len(), ric.states.len());
    for (a, b) in tr.states.iter().zip(&ric.states) {
        assert!((a.values()[0] - b.values()[0]).abs() <= 1e-6);
        assert!((a.values()[1] - b.values()[1]).abs() <= 1e-6);
        assert!(a.values()[1] > 0.0);
    }
    assert!(tr.max_dissipation_residual() <= 1e-6);
    assert!(tr.energy_drift() <= 1e-6);
}

#[test]
fn compare_variants_examples() {
    let p = ModelParameters::new(1.0, 1.0, 1.0);
    let c = LinearHamiltonianCoefficients::new(0.2, 0.1, 0.3, 0.4, -0.5);
    let opts = IntegrationOptions::new(0.5, 0.05, Method::AdaptiveRk45);
    let x0 = [0.2, 1.1, 0.3, -0.2, 0.0];
    let d = compare_variants(&c, &p, Variant::Gtacos, Variant::BaseXj1, &x0, &opts).unwrap();
    assert!(d.max_delta <= 1e-8);
    let d = compare_variants(&c, &p, Variant::Gtacos, Variant::Gtacos, &x0, &opts).unwrap();
    assert_eq!(d.max_delta, 0.0);
}

#[test]
fn discrepancy_report_detects_printed_forms() {
    let (c, p, x) = reference_case();
    let rows = discrepancy_report(&c, &p, &x).unwrap();
    let get = |name: &str| rows.iter().find(|r| r.equation == name).unwrap().residual;
    assert!(get("riccati x_dot (oracle vs generic)") <= 1e-10);
    assert!(get("riccati y_dot (oracle vs generic)") <= 1e-10);
    assert!(get("riccati x_dot (printed vs oracle)") > 1e-3);
    assert!(get("riccati y_dot (printed vs oracle)") > 1e-3);
    assert!(get("linear q_dot") > 1e-3);
    assert!(get("linear p_dot") > 1e-3);
    assert!(get("contact kappa_dot (equations of motion)") > 1e-3);
    assert!(get("contact x_dot") <= 1e-10);
}

#[test]
fn h_kappa_must_depend_on_kappa_only() {
    let c = LinearHamiltonianCoefficients::default().with_h_kappa("kappa*x");
    assert!(c.h_kappa_field().is_err());
    let c = LinearHamiltonianCoefficients::default().with_h_kappa("sin(kappa)");
    let h = c.h_kappa_field().unwrap();
    let _ = ScalarField::<f64>::parse("0", &xjt_chart(), &BTreeMap::new()).unwrap();
    assert!((h.eval(&[0.0, 1.0, 0.0, 0.0, 0.5]) - 0.5f64.sin()).abs() < 1e-15);
}
