use std::f64::consts::PI;
use std::sync::Arc;
use varorbit::audit::SampleScheme;
use varorbit::geometry::*;
use varorbit::*;

fn setup(pot: Arc<dyn Potential>) -> (FunctionalContext, SampleScheme) {
    let grid = TimeGrid::new(2.0 * PI, 32, 1).unwrap();
    let ctx = FunctionalContext::build(grid, MatrixPath::zero(&grid), pot).unwrap();
    (ctx, SampleScheme::for_grid(&grid, 42).unwrap())
}

fn aq_table(seed: u64) -> GeometryTable {
    let (ctx, scheme) = setup(Arc::new(PowerPotential::new(1.0, 1.5, 1).unwrap()));
    let hyp = Hypotheses { c2: Some(1.0), r2: Some(1.0), ..Default::default() };
    let mut cfg = GeometryConfig::new(Mode::Asymptotic, 2, 8);
    cfg.starts = 16;
    cfg.seed = seed;
    geometry_table(&ctx, &hyp, &scheme, &cfg).unwrap()
}

#[test]
fn sphere_minimum_decreases_with_lambda() {
    let tab = aq_table(3);
    for k in 2..=8 {
        let rows: Vec<_> = tab.reports.iter().filter(|r| r.k == k).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].alpha_hat <= rows[0].alpha_hat);
        assert!(rows[1].beta_hat.unwrap() <= rows[0].beta_hat.unwrap());
        assert!(rows[1].xi_hat.unwrap() <= rows[0].xi_hat.unwrap());
    }
}

#[test]
fn table_is_deterministic_and_csv_has_fixed_columns() {
    let (a, b) = (aq_table(9), aq_table(9));
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    write_geometry_csv(&a, &mut ca).unwrap();
    write_geometry_csv(&b, &mut cb).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,lambda,ell_emp,ell_cert,rho,r,alpha_hat,alpha_floor,beta_hat,xi_hat,C_k,delta_or_S,eps_k,flags"
    );
    assert_eq!(lines.count(), a.reports.len());
}

#[test]
fn free_quadratic_minimum_is_half_rho_squared() {
    let (ctx, _) = setup(Arc::new(FnPotential::zero(1)));
    for k in [2, 5, 9] {
        let z = Subspace::tail(ctx.dec(), k).unwrap();
        let e = sphere_extrema(&ctx, &z, 1.7, 1.0, Sense::Min, 8, 1, &[]).unwrap();
        assert!((e.value - 0.5 * 1.7 * 1.7).abs() < 1e-12);
        assert!(e.spread < 1e-12);
    }
}

#[test]
fn ell_is_positive_nonincreasing_and_certified() {
    let tab = aq_table(5);
    let rows: Vec<_> = tab.reports.iter().filter(|r| r.lambda == 1.0).collect();
    for w in rows.windows(2) {
        assert!(w[1].ell_emp <= w[0].ell_emp + 1e-6);
        assert!(w[1].ell_cert <= w[0].ell_cert * (1.0 + 1e-12));
    }
    for r in rows {
        assert!(r.ell_emp > 0.0 && r.ell_emp <= r.ell_cert * (1.0 + 1e-12));
        assert!(r.ell_emp <= r.ell_simple.unwrap() * (1.0 + 1e-12));
    }
}

#[test]
fn sq_radius_grows() {
    let (ctx, scheme) = setup(Arc::new(PowerPotential::quartic(1)));
    let hyp = Hypotheses { a1: Some(1.0), nu: Some(4.0), ..Default::default() };
    let mut cfg = GeometryConfig::new(Mode::Superquadratic, 2, 10);
    cfg.lambdas = vec![1.0];
    cfg.starts = 16;
    let tab = geometry_table(&ctx, &hyp, &scheme, &cfg).unwrap();
    let rho: Vec<f64> = tab.reports.iter().map(|r| r.rho).collect();
    assert!(rho.windows(2).all(|w| w[1] >= w[0]));
    assert!(rho.last() > rho.first());
    for r in &tab.reports {
        assert!(r.r.unwrap() > r.rho);
        assert!(r.alpha_hat >= r.alpha_floor);
    }
}

#[test]
fn missing_constants_and_bad_ranges_are_errors() {
    let (ctx, scheme) = setup(Arc::new(PowerPotential::quartic(1)));
    let cfg = GeometryConfig::new(Mode::Superquadratic, 2, 4);
    assert!(matches!(
        geometry_table(&ctx, &Hypotheses::default(), &scheme, &cfg),
        Err(Error::MissingConstant(_))
    ));
    let hyp = Hypotheses { a1: Some(1.0), nu: Some(4.0), ..Default::default() };
    let cfg = GeometryConfig::new(Mode::Superquadratic, 1, 4);
    assert!(geometry_table(&ctx, &hyp, &scheme, &cfg).is_err());
}
