use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};
use varorbit::fourier::TrigInterpolant;
use varorbit::*;

fn contexts() -> &'static [FunctionalContext] {
    static CTX: OnceLock<Vec<FunctionalContext>> = OnceLock::new();
    CTX.get_or_init(|| {
        let grid = TimeGrid::new(2.0 * PI, 32, 1).unwrap();
        let pots: Vec<Arc<dyn Potential>> = vec![
            Arc::new(PowerPotential::new(1.0, 1.5, 1).unwrap()),
            Arc::new(PowerPotential::quartic(1)),
            Arc::new(PowerPotential::modulated(1.0, 3.0, 0.5, 2.0 * PI, 1).unwrap()),
        ];
        pots.into_iter()
            .map(|p| FunctionalContext::build(grid, MatrixPath::constant(&grid, 0.5), p).unwrap())
            .collect()
    })
}

fn loop_from(c: &FunctionalContext, coeffs: &[f64]) -> GridFunction {
    let sub = Subspace::leading(c.dec(), coeffs.len()).unwrap();
    sub.to_grid(&nalgebra::DVector::from_column_slice(coeffs))
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn action_is_even(which in 0usize..3, c in coeffs(), lambda in 0.5f64..2.0) {
        let ctx = &contexts()[which];
        let u = loop_from(ctx, &c);
        let a = ctx.phi_lambda(&u, lambda).unwrap();
        let b = ctx.phi_lambda(&u.scaled(-1.0), lambda).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
    }

    #[test]
    fn action_decreases_in_lambda(which in 0usize..3, c in coeffs(), lambda in 1.0f64..2.0, dl in 0.01f64..0.5) {
        let ctx = &contexts()[which];
        let u = loop_from(ctx, &c);
        prop_assume!(ctx.b_part(&u).unwrap() > 0.0);
        prop_assert!(ctx.phi_lambda(&u, lambda + dl).unwrap() < ctx.phi_lambda(&u, lambda).unwrap());
    }

    #[test]
    fn riesz_gradient_matches_differences(which in 0usize..3, c in coeffs(), d in coeffs(), lambda in 1.0f64..2.0) {
        let ctx = &contexts()[which];
        let (u, v) = (loop_from(ctx, &c), loop_from(ctx, &d));
        let g = ctx.grad_phi_lambda(&u, lambda).unwrap();
        let exact = ctx.dec().e_inner(&g, &v).unwrap();
        let h = 1e-5;
        let fd = (ctx.phi_lambda(&u.axpy(h, &v).unwrap(), lambda).unwrap()
            - ctx.phi_lambda(&u.axpy(-h, &v).unwrap(), lambda).unwrap()) / (2.0 * h);
        let scale = ctx.dec().e_norm(&g).unwrap() * ctx.dec().e_norm(&v).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-6 * scale.max(exact.abs()).max(1e-12));
        let weak = ctx.phi_prime_apply(&u, &v, lambda).unwrap();
        prop_assert!((weak - exact).abs() <= 1e-10 * scale.max(1e-12));
    }

    #[test]
    fn parseval_holds(c in coeffs()) {
        let ctx = &contexts()[0];
        let u = GridFunction::from_fn(*ctx.grid(), |t, o| {
            o[0] = c.iter().enumerate().map(|(j, a)| a * ((j / 2) as f64 * t + (j % 2) as f64).cos()).sum();
        });
        let k = ctx.dec().coefficients(&u).unwrap();
        prop_assert!((k.norm_squared() - u.l2_norm().powi(2)).abs() <= 1e-10 * (1.0 + k.norm_squared()));
    }

    #[test]
    fn shift_and_resample_round_trip(c in coeffs(), s in 0.0f64..(2.0 * PI)) {
        let ctx = &contexts()[1];
        let u = loop_from(ctx, &c);
        let it = TrigInterpolant::new(&u);
        let back = TrigInterpolant::new(&it.shifted(s)).shifted(-s);
        prop_assert!(back.axpy(-1.0, &u).unwrap().l2_norm() <= 1e-10 * (1.0 + u.l2_norm()));
        let fine = it.resample(64).unwrap();
        prop_assert!((fine.l2_norm() - u.l2_norm()).abs() <= 1e-10 * (1.0 + u.l2_norm()));
    }
}

#[test]
fn eigenvectors_are_orthonormal_and_sorted() {
    let dec = contexts()[0].dec();
    let b = dec.basis();
    let gram = b.tr_mul(b) * dec.grid().spacing();
    let err = (gram - nalgebra::DMatrix::identity(dec.len(), dec.len())).amax();
    assert!(err < 1e-10, "{err}");
    assert!(dec.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
}
