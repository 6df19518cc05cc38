//! The action functional `Φ(u) = ½‖u⁺‖² - ½‖u⁻‖² - Ψ(u)` and the family
//! `Φ_λ = A - λB` with `A(u) = ½‖u⁺‖²`, `B(u) = ½‖u⁻‖² + Ψ(u)`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::potential::{hessian_or_fd, Potential};
use crate::spectral::{GridFunction, MatrixPath, Part, SpectralDecomposition, TimeGrid};

/// Everything needed to evaluate `Φ_λ` on a grid.
#[derive(Debug, Clone)]
pub struct FunctionalContext {
    path: MatrixPath,
    dec: Arc<SpectralDecomposition>,
    potential: Arc<dyn Potential>,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    if !(1.0..=2.0).contains(&lambda) {
        warn!("lambda = {lambda} lies outside [1, 2]");
    }
    Ok(())
}

impl FunctionalContext {
    pub fn new(path: MatrixPath, dec: Arc<SpectralDecomposition>, potential: Arc<dyn Potential>) -> Result<Self> {
        let grid = dec.grid();
        if potential.dim() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "potential acts on R^{}, grid carries R^{}",
                potential.dim(),
                grid.dim()
            )));
        }
        // the path must have one sample per node of matching size
        MatrixPath::from_samples(grid, (0..grid.nodes()).map(|j| path.sample(j).clone()).collect())?;
        Ok(Self { path, dec, potential })
    }

    /// Assembles and decomposes the operator, then builds the context.
    pub fn build(grid: TimeGrid, path: MatrixPath, potential: Arc<dyn Potential>) -> Result<Self> {
        let dec = SpectralDecomposition::from_path(grid, &path, None)?;
        Self::new(path, Arc::new(dec), potential)
    }

    pub fn grid(&self) -> &TimeGrid {
        self.dec.grid()
    }

    pub fn dec(&self) -> &SpectralDecomposition {
        &self.dec
    }

    pub fn dec_arc(&self) -> Arc<SpectralDecomposition> {
        Arc::clone(&self.dec)
    }

    pub fn path(&self) -> &MatrixPath {
        &self.path
    }

    pub fn potential(&self) -> &dyn Potential {
        self.potential.as_ref()
    }

    pub fn potential_arc(&self) -> Arc<dyn Potential> {
        Arc::clone(&self.potential)
    }

    /// Whether the problem is invariant under time shifts.
    pub fn is_autonomous(&self) -> bool {
        self.path.is_constant() && self.potential.is_autonomous()
    }

    /// `Ψ(u) = ∫ W(t, u) dt` by the periodic rectangle rule.
    pub fn psi(&self, u: &GridFunction) -> Result<f64> {
        u.ensure_same_grid(self.grid())?;
        let grid = self.grid();
        let mut sum = 0.0;
        for j in 0..grid.nodes() {
            let w = self.potential.value(grid.time(j), u.node(j));
            if !w.is_finite() {
                return Err(Error::NonFinite { what: "W", node: j });
            }
            sum += w;
        }
        Ok(grid.spacing() * sum)
    }

    /// Samples of `∇_u W(t_j, u_j)`.
    pub fn nonlinear_gradient(&self, u: &GridFunction) -> Result<GridFunction> {
        u.ensure_same_grid(self.grid())?;
        let grid = *self.grid();
        let n = grid.dim();
        let mut out = vec![0.0; grid.len()];
        for j in 0..grid.nodes() {
            let g = &mut out[j * n..(j + 1) * n];
            self.potential.gradient(grid.time(j), u.node(j), g);
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "gradW", node: j });
            }
        }
        GridFunction::from_vec(grid, out)
    }

    fn squared_parts(&self, c: &DVector<f64>) -> (f64, f64) {
        let dec = &self.dec;
        let w = dec.weights();
        let mut plus = 0.0;
        let mut minus = 0.0;
        for i in 0..c.len() {
            match dec.part(i) {
                Part::Plus => plus += w[i] * c[i] * c[i],
                Part::Minus => minus += w[i] * c[i] * c[i],
                Part::Zero => {}
            }
        }
        (plus, minus)
    }

    /// `A(u) = ½‖u⁺‖²`.
    pub fn a_part(&self, u: &GridFunction) -> Result<f64> {
        let c = self.dec.coefficients(u)?;
        Ok(0.5 * self.squared_parts(&c).0)
    }

    /// `B(u) = ½‖u⁻‖² + Ψ(u)`.
    pub fn b_part(&self, u: &GridFunction) -> Result<f64> {
        let c = self.dec.coefficients(u)?;
        Ok(0.5 * self.squared_parts(&c).1 + self.psi(u)?)
    }

    pub fn phi_lambda(&self, u: &GridFunction, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let c = self.dec.coefficients(u)?;
        let (plus, minus) = self.squared_parts(&c);
        Ok(0.5 * plus - lambda * (0.5 * minus + self.psi(u)?))
    }

    pub fn phi(&self, u: &GridFunction) -> Result<f64> {
        self.phi_lambda(u, 1.0)
    }

    /// Eigen-coordinates of the `E`-Riesz gradient of `Φ_λ` at `u`.
    pub fn gradient_coefficients(&self, u: &GridFunction, lambda: f64) -> Result<DVector<f64>> {
        check_lambda(lambda)?;
        let dec = &self.dec;
        let c = dec.coefficients(u)?;
        let gc = dec.coefficients(&self.nonlinear_gradient(u)?)?;
        let w = dec.weights();
        Ok(DVector::from_fn(c.len(), |i, _| {
            let linear = match dec.part(i) {
                Part::Plus => c[i],
                Part::Minus => -lambda * c[i],
                Part::Zero => 0.0,
            };
            linear - lambda * gc[i] / w[i]
        }))
    }

    /// The `E`-Riesz gradient: `e_inner(grad, v) = Φ'_λ(u)v` for all `v`.
    pub fn grad_phi_lambda(&self, u: &GridFunction, lambda: f64) -> Result<GridFunction> {
        Ok(self.dec.synthesize(&self.gradient_coefficients(u, lambda)?))
    }

    /// `‖Φ'_λ(u)‖_{E*}`.
    pub fn dual_norm(&self, u: &GridFunction, lambda: f64) -> Result<f64> {
        let g = self.gradient_coefficients(u, lambda)?;
        Ok(self.dec.e_inner_coeffs(&g, &g).sqrt())
    }

    /// Weak form `(u⁺,v⁺) - λ(u⁻,v⁻) - λ∫⟨∇W(t,u), v⟩`.
    pub fn phi_prime_apply(&self, u: &GridFunction, v: &GridFunction, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        v.ensure_same_grid(self.grid())?;
        let dec = &self.dec;
        let cu = dec.coefficients(u)?;
        let cv = dec.coefficients(v)?;
        let w = dec.weights();
        let mut lin = 0.0;
        for i in 0..cu.len() {
            match dec.part(i) {
                Part::Plus => lin += w[i] * cu[i] * cv[i],
                Part::Minus => lin -= lambda * w[i] * cu[i] * cv[i],
                Part::Zero => {}
            }
        }
        let g = self.nonlinear_gradient(u)?;
        Ok(lin - lambda * g.l2_inner(v)?)
    }

    /// `Φ_λ` in the coordinates `x` of a [`Subspace`].
    pub fn reduced_value(&self, sub: &Subspace, x: &DVector<f64>, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let u = sub.to_grid(x);
        let mut plus = 0.0;
        let mut minus = 0.0;
        for (xi, p) in x.iter().zip(&sub.parts) {
            match p {
                Part::Plus => plus += xi * xi,
                Part::Minus => minus += xi * xi,
                Part::Zero => {}
            }
        }
        Ok(0.5 * plus - lambda * (0.5 * minus + self.psi(&u)?))
    }

    /// Euclidean gradient of [`Self::reduced_value`]; its norm over the full
    /// index set is the dual norm of `Φ'_λ`.
    pub fn reduced_gradient(&self, sub: &Subspace, x: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
        check_lambda(lambda)?;
        let u = sub.to_grid(x);
        let g = self.nonlinear_gradient(&u)?;
        let proj = sub.scaled.tr_mul(g.values()) * self.grid().spacing();
        Ok(DVector::from_fn(x.len(), |i, _| sub.sign(i, lambda) * x[i] - lambda * proj[i]))
    }

    /// Hessian of [`Self::reduced_value`], using the analytic `∇²W` when the
    /// potential provides one and finite differences otherwise.
    pub fn reduced_hessian(&self, sub: &Subspace, x: &DVector<f64>, lambda: f64) -> Result<DMatrix<f64>> {
        check_lambda(lambda)?;
        let u = sub.to_grid(x);
        let grid = self.grid();
        let n = grid.dim();
        let d = sub.dim();
        let scale = u.l2_norm() / grid.period().sqrt();
        let mut hb = DMatrix::zeros(grid.len(), d);
        let mut block = vec![0.0; n * n];
        for j in 0..grid.nodes() {
            hessian_or_fd(self.potential.as_ref(), grid.time(j), u.node(j), scale, &mut block);
            if block.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "hessW", node: j });
            }
            for col in 0..d {
                for a in 0..n {
                    let mut acc = 0.0;
                    for b in 0..n {
                        acc += block[a * n + b] * sub.scaled[(j * n + b, col)];
                    }
                    hb[(j * n + a, col)] = acc;
                }
            }
        }
        let mut hess = sub.scaled.tr_mul(&hb) * (-lambda * grid.spacing());
        for i in 0..d {
            hess[(i, i)] += sub.sign(i, lambda);
        }
        Ok((&hess + hess.transpose()) * 0.5)
    }
}

/// A span of eigenvectors in the `E`-isometric coordinates
/// `x_i = √w_i (u, e_i)₂`, so that `‖u‖ = |x|`.
#[derive(Debug, Clone)]
pub struct Subspace {
    indices: Vec<usize>,
    scaled: DMatrix<f64>,
    parts: Vec<Part>,
    grid: TimeGrid,
    sqrt_weights: Vec<f64>,
}

impl Subspace {
    pub fn new(dec: &SpectralDecomposition, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty subspace".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= dec.len()) {
            return Err(Error::InvalidArgument(format!("eigen index {bad} out of range")));
        }
        let sqrt_weights: Vec<f64> = indices.iter().map(|&i| dec.weights()[i].sqrt()).collect();
        let mut scaled = DMatrix::zeros(dec.len(), indices.len());
        for (col, &i) in indices.iter().enumerate() {
            scaled.set_column(col, &(dec.basis().column(i) / sqrt_weights[col]));
        }
        let parts = indices.iter().map(|&i| dec.part(i)).collect();
        Ok(Self { indices, scaled, parts, grid: *dec.grid(), sqrt_weights })
    }

    /// `Y_k = span{e_1, …, e_k}` (1-based `k`).
    pub fn leading(dec: &SpectralDecomposition, k: usize) -> Result<Self> {
        if k == 0 || k > dec.len() {
            return Err(Error::InvalidArgument(format!("level k = {k} outside 1..={}", dec.len())));
        }
        Self::new(dec, (0..k).collect())
    }

    /// `Z_k = span{e_k, e_{k+1}, …}` (1-based `k`).
    pub fn tail(dec: &SpectralDecomposition, k: usize) -> Result<Self> {
        if k == 0 || k > dec.len() {
            return Err(Error::InvalidArgument(format!("level k = {k} outside 1..={}", dec.len())));
        }
        Self::new(dec, (k - 1..dec.len()).collect())
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    /// Grid values of `e_i/√w_i`, one column per coordinate.
    pub fn scaled_basis(&self) -> &DMatrix<f64> {
        &self.scaled
    }

    fn sign(&self, i: usize, lambda: f64) -> f64 {
        match self.parts[i] {
            Part::Plus => 1.0,
            Part::Minus => -lambda,
            Part::Zero => 0.0,
        }
    }

    pub fn to_grid(&self, x: &DVector<f64>) -> GridFunction {
        GridFunction::new(self.grid, &self.scaled * x).expect("finite coordinates")
    }

    /// Coordinates of the `E`-orthogonal projection of `u` onto the span.
    pub fn coordinates(&self, dec: &SpectralDecomposition, u: &GridFunction) -> Result<DVector<f64>> {
        let c = dec.coefficients(u)?;
        Ok(DVector::from_fn(self.dim(), |col, _| self.sqrt_weights[col] * c[self.indices[col]]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{FnPotential, PowerPotential};
    use std::f64::consts::PI;

    fn duffing(m: usize) -> FunctionalContext {
        let grid = TimeGrid::new(2.0 * PI, m, 1).unwrap();
        FunctionalContext::build(grid, MatrixPath::zero(&grid), Arc::new(PowerPotential::quartic(1))).unwrap()
    }

    #[test]
    fn psi_examples() {
        let ctx = duffing(64);
        let grid = *ctx.grid();
        assert_eq!(ctx.psi(&GridFunction::zeros(grid)).unwrap(), 0.0);
        let cosine = GridFunction::from_fn(grid, |t, o| o[0] = t.cos());
        assert!((ctx.psi(&cosine).unwrap() - 3.0 * PI / 16.0).abs() < 1e-13);
        let aq = FunctionalContext::build(grid, MatrixPath::zero(&grid), Arc::new(PowerPotential::new(1.0, 1.5, 1).unwrap()))
            .unwrap();
        let one = GridFunction::from_fn(grid, |_, o| o[0] = 1.0);
        assert!((aq.psi(&one).unwrap() - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn phi_of_cosine_under_quartic() {
        let ctx = duffing(64);
        let cosine = GridFunction::from_fn(*ctx.grid(), |t, o| o[0] = t.cos());
        assert!((ctx.phi(&cosine).unwrap() - 5.0 * PI / 16.0).abs() < 1e-10);
        assert!((ctx.phi_lambda(&cosine, 2.0).unwrap() - PI / 8.0).abs() < 1e-10);
        assert!((ctx.a_part(&cosine).unwrap() - PI / 2.0).abs() < 1e-10);
        assert!((ctx.b_part(&cosine).unwrap() - 3.0 * PI / 16.0).abs() < 1e-10);
    }

    #[test]
    fn zero_is_critical_with_zero_value() {
        let ctx = duffing(16);
        let z = GridFunction::zeros(*ctx.grid());
        for lambda in [1.0, 1.5, 2.0] {
            assert_eq!(ctx.phi_lambda(&z, lambda).unwrap(), 0.0);
            assert_eq!(ctx.grad_phi_lambda(&z, lambda).unwrap().l2_norm(), 0.0);
        }
    }

    #[test]
    fn quadratic_part_gradient_is_identity_on_plus_space() {
        let grid = TimeGrid::new(2.0 * PI, 16, 1).unwrap();
        let ctx = FunctionalContext::build(grid, MatrixPath::zero(&grid), Arc::new(FnPotential::zero(1))).unwrap();
        for i in [1, 4, 9] {
            let e = ctx.dec().eigenvector(i);
            let g = ctx.grad_phi_lambda(&e, 1.0).unwrap();
            assert!(g.axpy(-1.0, &e).unwrap().l2_norm() < 1e-12);
            let lam = ctx.dec().eigenvalues()[i];
            assert!((ctx.phi_prime_apply(&e, &e, 1.0).unwrap() - lam).abs() < 1e-10 * lam);
        }
    }

    #[test]
    fn riesz_identities() {
        let ctx = duffing(16);
        let grid = *ctx.grid();
        let u = GridFunction::from_fn(grid, |t, o| o[0] = 0.3 + t.sin() - 0.4 * (2.0 * t).cos());
        let g = ctx.grad_phi_lambda(&u, 1.3).unwrap();
        let gn = ctx.dec().e_norm(&g).unwrap();
        assert!((ctx.phi_prime_apply(&u, &g, 1.3).unwrap() - gn * gn).abs() < 1e-9 * gn * gn);
        assert!((ctx.dual_norm(&u, 1.3).unwrap() - gn).abs() < 1e-12 * gn);
        // v E-orthogonal to the gradient
        let w = GridFunction::from_fn(grid, |t, o| o[0] = (3.0 * t).cos());
        let coef = ctx.dec().e_inner(&w, &g).unwrap() / (gn * gn);
        let v = w.axpy(-coef, &g).unwrap();
        assert!(ctx.phi_prime_apply(&u, &v, 1.3).unwrap().abs() < 1e-9 * (1.0 + gn));
    }

    #[test]
    fn reduced_coordinates_agree_with_full_functional() {
        let ctx = duffing(16);
        let sub = Subspace::leading(ctx.dec(), 7).unwrap();
        let x = DVector::from_fn(7, |i, _| 0.2 * (i as f64 + 1.0).sin());
        let u = sub.to_grid(&x);
        assert!((ctx.dec().e_norm(&u).unwrap() - x.norm()).abs() < 1e-12);
        let lam = 1.4;
        assert!((ctx.reduced_value(&sub, &x, lam).unwrap() - ctx.phi_lambda(&u, lam).unwrap()).abs() < 1e-12);
        let g = ctx.reduced_gradient(&sub, &x, lam).unwrap();
        let h = 1e-6;
        for i in 0..7 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (ctx.reduced_value(&sub, &xp, lam).unwrap() - ctx.reduced_value(&sub, &xm, lam).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7);
        }
        let hess = ctx.reduced_hessian(&sub, &x, lam).unwrap();
        for i in 0..7 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let col = (ctx.reduced_gradient(&sub, &xp, lam).unwrap() - ctx.reduced_gradient(&sub, &xm, lam).unwrap()) / (2.0 * h);
            for r in 0..7 {
                assert!((col[r] - hess[(r, i)]).abs() < 1e-6);
            }
        }
        let back = sub.coordinates(ctx.dec(), &u).unwrap();
        assert!((back - x).norm() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_lambda_and_nonfinite_potential() {
        let ctx = duffing(8);
        let u = GridFunction::zeros(*ctx.grid());
        assert!(ctx.phi_lambda(&u, 0.0).is_err());
        let grid = *ctx.grid();
        let bad = FunctionalContext::build(
            grid,
            MatrixPath::zero(&grid),
            Arc::new(FnPotential::new("bad", 1, |t, _| if t > 1.0 { f64::NAN } else { 0.0 }, |_, _, g| g[0] = 0.0)),
        )
        .unwrap();
        match bad.psi(&u) {
            Err(Error::NonFinite { node, .. }) => assert_eq!(node, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
