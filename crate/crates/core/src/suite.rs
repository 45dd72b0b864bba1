//! Seeded invariant checks over the catalog, shared by the command line
//! front end and the tests.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::almost_contact::{
    nijenhuis_n1, ppp_negative_witness, sasaki_axiom_residuals, sasaki_from_potential, solve_phi, FreeComponents,
    NijenhuisConvention, PhiSolverOptions, SasakiPotential,
};
use crate::chart::{Chart, ChartPoint};
use crate::dynamics::{
    directional, gradient_field, hamiltonian_field_closed, hamiltonian_field_generic, jacobi_bracket, jacobi_bracket_field,
    jacobi_bracket_sharp,
};
use crate::error::Result;
use crate::field::ScalarField;
use crate::integrate::{IntegrationOptions, Method};
use crate::jacobi_flows::{integrate_eom, integrate_riccati, LinearHamiltonianCoefficients, Variant};
use crate::manifolds::{cayley_map, disk_kahler_form, xj1_chart, xjt_chart, Builtin, ModelParameters};
use crate::structures::{CanonicalThetaSpec, StructureSpec};

pub const DEFAULT_SEED: u64 = 42;

/// `COSYM_SEED` wins over `requested`, which wins over the default.
pub fn resolve_seed(requested: Option<u64>) -> u64 {
    std::env::var("COSYM_SEED").ok().and_then(|s| s.trim().parse().ok()).or(requested).unwrap_or(DEFAULT_SEED)
}

/// Uniform points in the chart's sampling box that satisfy its guards.
pub fn random_points(chart: &Arc<Chart>, count: usize, rng: &mut StdRng) -> Vec<ChartPoint<f64>> {
    let boxes = chart.sample_box();
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 1000 * count.max(1) {
        tries += 1;
        let x: Vec<f64> = boxes.iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)).collect();
        if let Ok(p) = ChartPoint::new(chart.clone(), x) {
            out.push(p);
        }
    }
    out
}

/// Random polynomial source over `coords` with `terms` monomials of total
/// degree at most `degree`.
pub fn random_polynomial(coords: &[String], degree: u32, terms: usize, rng: &mut StdRng) -> String {
    let mut parts = Vec::with_capacity(terms);
    for _ in 0..terms {
        let c: f64 = rng.gen_range(-1.0..1.0);
        let d = rng.gen_range(0..=degree);
        let mut mono = format!("({c:.6})");
        for _ in 0..d {
            mono.push('*');
            mono.push_str(&coords[rng.gen_range(0..coords.len())]);
        }
        parts.push(mono);
    }
    parts.join(" + ")
}

/// Random canonical θ on the `n`-th Darboux chart, with `|c| ≥ 0.5`.
pub fn random_theta(n: usize, rng: &mut StdRng) -> Result<(Arc<Chart>, CanonicalThetaSpec<f64>)> {
    let chart = Builtin::DarbouxCosymplectic(n).build::<f64>(&ModelParameters::default())?.chart().clone();
    let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let c = rng.gen_range(0.5..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    Ok((chart, CanonicalThetaSpec::constant(&a, &b, c)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Check {
        Check { name: name.into(), value, tolerance, passed: value <= tolerance, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn catalog(params: &ModelParameters) -> Result<Vec<StructureSpec<f64>>> {
    Builtin::catalog().iter().map(|b| b.build(params)).collect()
}

/// Runs every check with one seed.
pub fn run_invariant_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = StdRng::seed_from_u64(seed);
    let params = ModelParameters::new(1.3, 0.7, 1.9);
    let mut checks = Vec::new();

    // Reeb contractions, lattice, flat/sharp.
    let (mut reeb, mut lattice_ok, mut round) = (0.0f64, true, 0.0f64);
    for s in catalog(&params)? {
        let class = s.classify_default()?;
        lattice_ok &= class.lattice_holds();
        for p in s.chart().probe_points::<f64>(64) {
            let x = p.values();
            let r = s.reeb(&p)?;
            let w = s.omega_matrix(x);
            let th = s.theta_at(x);
            for i in 0..r.len() {
                let wr: f64 = (0..r.len()).map(|j| r[j] * w[(j, i)]).sum();
                reeb = reeb.max(wr.abs());
            }
            reeb = reeb.max((directional_dot(&r, &th) - 1.0).abs());
            let v: Vec<f64> = (0..r.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let back = s.sharp(&s.flat(&v, &p)?, &p)?;
            round = back.iter().zip(&v).fold(round, |m, (a, b)| m.max((a - b).abs()));
        }
    }
    checks.push(Check::at_most("reeb contractions", reeb, 1e-11, "catalog, 64 probes each"));
    checks.push(Check { name: "classification lattice".into(), value: 0.0, tolerance: 0.0, passed: lattice_ok, detail: String::new() });
    checks.push(Check::at_most("flat-sharp round trip", round, 1e-10, "catalog, one random vector per probe"));

    // Closed form against the generic solve; dissipation law; grad identity.
    let (mut oracle, mut dissipation, mut xgr) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..100 {
        let n = 1 + i % 3;
        let (chart, spec) = random_theta(n, &mut rng)?;
        let s = spec.structure("random", chart.clone())?;
        let h = ScalarField::parse(&random_polynomial(chart.coordinates(), 3, 5, &mut rng), &chart, &BTreeMap::new())?;
        let at = random_points(&chart, 1, &mut rng).remove(0);
        let x = at.values();
        let generic = hamiltonian_field_generic(&s, &h, &at)?;
        let closed = hamiltonian_field_closed(&spec, &h, &at)?.to_vector(chart.darboux().unwrap(), chart.dimension())?;
        oracle = generic.iter().zip(&closed).fold(oracle, |m, (a, b)| m.max(rel(*b, *a)));
        let r = s.reeb(&at)?;
        let rh = directional(&r, &h, x);
        let hv = h.eval(x);
        dissipation = dissipation.max((directional(&generic, &h, x) + hv * rh).abs());
        let grad = gradient_field(&s, &h, &at)?;
        for j in 0..grad.len() {
            xgr = xgr.max((generic[j] + (hv + rh) * r[j] - grad[j]).abs());
        }
    }
    checks.push(Check::at_most("closed form vs generic (relative)", oracle, 1e-9, "100 random theta/H/point"));
    checks.push(Check::at_most("dissipation X_H(H) + H R(H)", dissipation, 1e-8, "100 random cases"));
    checks.push(Check::at_most("X_H = grad H - (H + R(H)) R", xgr, 1e-9, "100 random cases"));

    // Energy drift along κ-independent flows.
    let opts = IntegrationOptions::new(1.0, 0.05, Method::AdaptiveRk45);
    let s = Builtin::DarbouxContact(1).build::<f64>(&params)?;
    let h = ScalarField::parse("0.5*(p^2 + q^2) + q*p", s.chart(), &BTreeMap::new())?;
    let tr = crate::dynamics::integrate(&s, &h, &ChartPoint::from_f64(s.chart().clone(), &[0.3, 0.8, 0.1])?, &opts)?;
    checks.push(Check::at_most("energy drift (kappa-independent H)", tr.energy_drift(), 1e-6, "darboux_contact(1), t in [0,1]"));

    // Volume coefficient against 4 k nu sqrt(delta) / y^2.
    let g = Builtin::XjtGtacos.build::<f64>(&params)?;
    let mut vol = 0.0f64;
    for p in random_points(g.chart(), 50, &mut rng) {
        let y = p.values()[1];
        vol = vol.max(rel(g.volume_coefficient(p.values()), 4.0 * params.k * params.nu * params.delta.sqrt() / (y * y)));
    }
    checks.push(Check::at_most("volume coefficient 4 k nu sqrt(delta)/y^2", vol, 1e-12, "xjt_gtacos, 50 points"));

    // Cayley pullback.
    let omega = disk_kahler_form::<f64>(&params)?;
    let map = cayley_map();
    let mut cay = 0.0f64;
    for p in random_points(&xj1_chart(), 50, &mut rng) {
        let y = p.values()[1];
        let pb = map.pullback(&omega, &p)?;
        let mut want = crate::forms::FormValue::zero(4, 2);
        want.add_term(vec![0, 1], params.k / (y * y));
        want.add_term(vec![3, 2], 2.0 * params.nu);
        cay = cay.max(pb.add(&want.scale(-1.0)).max_norm() / want.max_norm());
    }
    checks.push(Check::at_most("Cayley pullback (relative)", cay, 1e-8, "50 points"));

    // Heisenberg Sasaki structure.
    let hchart = Chart::new("heisenberg", &["x", "y", "kappa"]);
    let pot = SasakiPotential::new(ScalarField::parse("-y^2/2", &hchart, &BTreeMap::new())?, 1)?;
    let (mut axioms, mut nij) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let st = sasaki_from_potential(&pot, &x)?;
        axioms = sasaki_axiom_residuals(&st).values().fold(axioms, |m, v| m.max(*v));
        nij = nij.max(nijenhuis_n1(&pot.fields(), &x, NijenhuisConvention::Factor1));
    }
    checks.push(Check::at_most("Heisenberg Sasaki axioms", axioms, 1e-12, "10 points"));
    checks.push(Check::at_most("Heisenberg Nijenhuis N1", nij, 1e-8, "10 points"));

    // Φ solver and witness.
    let (mut phi_res, mut solved, mut witness) = (0.0f64, 0usize, 0.0f64);
    for p in random_points(&xjt_chart(), 10, &mut rng) {
        for _ in 0..5 {
            let free = FreeComponents::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if let Ok(sol) = solve_phi(free, &params, &p, &PhiSolverOptions::default()) {
                solved += 1;
                phi_res = phi_res.max(sol.axiom_residual());
                if sol.rank != 4 {
                    phi_res = f64::INFINITY;
                }
            }
        }
        let y = p.values()[1];
        witness = witness.max(rel(ppp_negative_witness(&params, &p)?, 2.0 * params.k / y));
    }
    checks.push(Check::at_most("phi solver axioms", phi_res, 1e-10, format!("{solved}/50 seeds converged")));
    checks.push(Check::at_most("negative witness 2k/y", witness, 1e-15, "10 points"));

    // Riccati projection.
    let mut ric = 0.0f64;
    for _ in 0..3 {
        let mc = rng.gen_range(0.1..1.0);
        let m = rng.gen_range(-1.0..1.0);
        let c = LinearHamiltonianCoefficients::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), mc - m, m, rng.gen_range(-1.0..1.0));
        let x0 = [rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0];
        let tr = integrate_eom(&c, &params, Variant::Gtacos, &x0, &opts)?;
        let rp = integrate_riccati(&c, [x0[0], x0[1]], &opts)?;
        for (a, b) in tr.states.iter().zip(&rp.states) {
            ric = ric.max((a.values()[0] - b.values()[0]).abs()).max((a.values()[1] - b.values()[1]).abs());
        }
    }
    checks.push(Check::at_most("Riccati projection", ric, 1e-6, "3 coefficient sets"));

    // Brackets.
    let s = Builtin::DarbouxContact(2).build::<f64>(&params)?;
    let chart = s.chart().clone();
    let layout = chart.darboux().unwrap().clone();
    let (mut anti, mut jac, mut sign) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let poly = |rng: &mut StdRng| ScalarField::parse(&random_polynomial(chart.coordinates(), 2, 4, rng), &chart, &BTreeMap::new());
        let (f, g, h) = (poly(&mut rng)?, poly(&mut rng)?, poly(&mut rng)?);
        let at = random_points(&chart, 1, &mut rng).remove(0);
        let fg = jacobi_bracket(&f, &g, &at)?;
        anti = anti.max((fg + jacobi_bracket(&g, &f, &at)?).abs());
        sign = sign.max((fg + jacobi_bracket_sharp(&s, &f, &g, &at)?).abs());
        let b = |u: &ScalarField<f64>, v: &ScalarField<f64>| jacobi_bracket_field(u, v, &layout);
        let cyc = b(&f, &b(&g, &h)?)? + b(&g, &b(&h, &f)?)? + b(&h, &b(&f, &g)?)?;
        jac = jac.max(cyc.eval(at.values()).abs());
    }
    checks.push(Check::at_most("bracket antisymmetry", anti, 1e-12, "20 random pairs"));
    checks.push(Check::at_most("bracket Jacobi identity", jac, 1e-6, "20 random triples"));
    checks.push(Check::at_most("{f,g} = -{f,g}_J", sign, 1e-10, "20 random pairs"));

    Ok(SuiteReport { seed, checks })
}

fn directional_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
