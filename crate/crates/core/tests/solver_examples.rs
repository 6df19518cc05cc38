use std::f64::consts::PI;
use std::sync::Arc;
use varorbit::fourier::TrigInterpolant;
use varorbit::solver::*;
use varorbit::validation::cubic_amplitude;
use varorbit::*;

fn ctx(m: usize, path: impl Fn(&TimeGrid) -> MatrixPath, pot: Arc<dyn Potential>) -> FunctionalContext {
    let grid = TimeGrid::new(2.0 * PI, m, 1).unwrap();
    FunctionalContext::build(grid, path(&grid), pot).unwrap()
}

fn duffing(m: usize) -> FunctionalContext {
    ctx(m, MatrixPath::zero, Arc::new(PowerPotential::quartic(1)))
}

fn cosine(c: &FunctionalContext, a: f64, j: f64) -> GridFunction {
    GridFunction::from_fn(*c.grid(), |t, o| o[0] = a * (j * t).cos())
}

#[test]
fn free_linear_problem_has_only_the_trivial_point() {
    let c = ctx(32, MatrixPath::zero, Arc::new(FnPotential::zero(1)));
    let res = multistart_collect(&c, 1.0, 9, &SolverConfig::default()).unwrap();
    assert!(res.points.is_empty(), "{:?}", res.diagnostics);
    assert_eq!(res.diagnostics.failed, 0);
}

#[test]
fn accepted_points_pass_the_weak_recheck() {
    let c = duffing(64);
    let cfg = SolverConfig::default();
    let res = multistart_collect(&c, 1.0, 12, &cfg).unwrap();
    assert!(res.points.len() >= 3);
    for p in &res.points {
        let w = varorbit::validation::weak_residual(&c, &p.u, 12).unwrap();
        assert!(w <= cfg.tol_g * (1.0 + p.norm_e), "{w}");
        assert!(p.grad_norm <= cfg.tol_g);
    }
    for (i, a) in res.points.iter().enumerate() {
        for b in &res.points[..i] {
            assert!(orbit_distance(&c, &a.u, &b.u).unwrap() > cfg.dedup_dist);
        }
    }
    let d = &res.diagnostics;
    assert!(d.min_pair_distance.unwrap() > cfg.dedup_dist);
    assert!(d.min_value_gap.is_some());
}

#[test]
fn multistart_is_deterministic() {
    let c = duffing(32);
    let cfg = SolverConfig { starts: 4, ..Default::default() };
    let a = multistart_collect(&c, 1.0, 8, &cfg).unwrap();
    let b = multistart_collect(&c, 1.0, 8, &cfg).unwrap();
    let values = |r: &MultistartResult| r.points.iter().map(|p| p.value.to_bits()).collect::<Vec<_>>();
    assert_eq!(values(&a), values(&b));
}

#[test]
fn aq_values_are_negative_and_rise_toward_zero() {
    let c = ctx(64, MatrixPath::zero, Arc::new(PowerPotential::new(1.0, 1.5, 1).unwrap()));
    let cfg = SolverConfig { mode: Mode::Asymptotic, ..Default::default() };
    let res = multistart_collect(&c, 1.0, 12, &cfg).unwrap();
    let mut pts: Vec<_> = res.points.iter().collect();
    assert!(pts.len() >= 3);
    assert!(pts.iter().all(|p| p.value < 0.0));
    pts.sort_by(|a, b| b.norm_e.total_cmp(&a.norm_e));
    assert!(pts.windows(2).all(|w| w[0].value < w[1].value));
}

#[test]
fn refinement_of_a_resolved_orbit_is_spectrally_small() {
    let coarse = duffing(64);
    let cfg = SolverConfig::default();
    let cp = find_critical(&coarse, &cosine(&coarse, 1.2, 1.0), 1.0, 36, &cfg).unwrap();
    let fine = duffing(128);
    let r = refine_level(&fine, &cp, 72, &cfg).unwrap();
    assert!(r.increment <= 1e-8, "{}", r.increment);
    assert!(!r.flagged);
}

#[test]
fn refinement_increment_at_k12_is_the_truncated_harmonic_scale() {
    // Y_12 keeps harmonics up to 5 (and cos 6t); the orbit's 7th harmonic is
    // about 1e-4 of the first, so the 12 -> 24 increment sits near that scale.
    let coarse = duffing(64);
    let cfg = SolverConfig::default();
    let cp = find_critical(&coarse, &cosine(&coarse, 1.2, 1.0), 1.0, 12, &cfg).unwrap();
    let fine = duffing(128);
    let r = refine_level(&fine, &cp, 24, &cfg).unwrap();
    let energy = TrigInterpolant::new(&r.point.u).harmonic_energy();
    let h7 = (energy[7] / energy[1]).sqrt();
    assert!(h7 > 1e-5 && h7 < 1e-3, "{h7}");
    assert!(r.increment > 1e-6 && r.increment < 1e-2, "{}", r.increment);
}

#[test]
fn trivial_point_refines_to_itself() {
    let coarse = duffing(32);
    let cfg = SolverConfig::default();
    let zero = GridFunction::zeros(*coarse.grid());
    let cp = find_critical(&coarse, &zero, 1.0, 8, &cfg).unwrap();
    assert!(cp.trivial);
    let r = refine_level(&duffing(64), &cp, 16, &cfg).unwrap();
    assert!(r.point.trivial);
    assert_eq!(r.increment, 0.0);
}

#[test]
fn under_resolved_start_is_flagged() {
    let coarse = duffing(8);
    let cfg = SolverConfig::default();
    let cp = find_critical(&coarse, &cosine(&coarse, 3.5, 3.0), 1.0, 8, &cfg).unwrap();
    let r = refine_level(&duffing(128), &cp, 64, &cfg).unwrap();
    assert!(r.flagged, "increment {}", r.increment);
}

#[test]
fn huge_lambda_step_converges_or_reports_lost() {
    let c = duffing(64);
    let cfg = SolverConfig { lambdas: vec![2.0, 1.0], ..Default::default() };
    let at_two = find_critical(&c, &cosine(&c, 1.2 / 2f64.sqrt(), 1.0), 2.0, 12, &cfg).unwrap();
    let branch = continue_branch(&c, &at_two, &cfg).unwrap();
    match branch.status {
        BranchStatus::ConvergedToOne => {
            let end = branch.last().unwrap();
            assert_eq!(end.lambda, 1.0);
            let amp = TrigInterpolant::new(&end.u).amplitude().0;
            assert!((amp - cubic_amplitude(1.0, 2.0 * PI, 1)).abs() < 1e-3);
        }
        BranchStatus::Lost => {}
        BranchStatus::Diverged => panic!("diverged"),
    }
    for p in &branch.points {
        assert!(p.grad_norm <= cfg.tol_g);
    }
}

#[test]
fn branches_without_quadratic_kernel_are_lambda_invariant() {
    let c = ctx(32, |g| MatrixPath::constant(g, -0.5), Arc::new(FnPotential::zero(1)));
    assert_eq!(c.dec().n_bar(), 0);
    let cfg = SolverConfig::default();
    let start = cosine(&c, 0.7, 2.0);
    let cp = find_critical(&c, &start, 2.0, 9, &cfg).unwrap();
    let branch = continue_branch(&c, &cp, &cfg).unwrap();
    assert_eq!(branch.status, BranchStatus::ConvergedToOne);
    for p in &branch.points {
        assert!(p.trivial);
        assert_eq!(p.value, 0.0);
    }
}

#[test]
fn duffing_branch_amplitude_varies_continuously() {
    let c = duffing(64);
    let cfg = SolverConfig::default();
    let at_two = find_critical(&c, &cosine(&c, 1.2 / 2f64.sqrt(), 1.0), 2.0, 12, &cfg).unwrap();
    let branch = continue_branch(&c, &at_two, &cfg).unwrap();
    assert_eq!(branch.status, BranchStatus::ConvergedToOne);
    // for the cubic, u_λ = u_1/√λ
    let end = TrigInterpolant::new(&branch.last().unwrap().u).amplitude().0;
    for p in &branch.points {
        let amp = TrigInterpolant::new(&p.u).amplitude().0;
        assert!((amp - end / p.lambda.sqrt()).abs() <= 1e-8 * end, "{} {amp}", p.lambda);
    }
    let values = branch.values();
    assert_eq!(values.len(), branch.points.len());
    let norms: Vec<f64> = branch.points.iter().map(|p| p.norm_e).collect();
    let report = boundedness_diagnostics(&norms, Mode::Superquadratic, 0.0).unwrap();
    assert!(report.passes);
}
