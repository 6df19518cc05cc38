//! Critical points of `Φ_λ` restricted to Galerkin subspaces `Y_k`: damped
//! Newton with a Levenberg–Marquardt fallback, multi-start collection with
//! exclusion-radius deflation, continuation in `λ` and refinement in `k`.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::TrigInterpolant;
use crate::functional::{FunctionalContext, Subspace};
use crate::potential::Mode;
use crate::spectral::GridFunction;
use crate::validation::{strong_residual, ResidualReport};

/// Points with `‖u‖` below this are reported as trivial.
pub const TRIVIAL_NORM: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    /// Galerkin level: the solve takes place on `Y_k`.
    pub k: usize,
    /// Decreasing continuation schedule ending at 1.
    pub lambdas: Vec<f64>,
    /// Random starts per radius (axis starts are always added).
    pub starts: usize,
    /// Sphere radii for the starts; empty selects [`default_start_radii`].
    pub radii: Vec<f64>,
    /// Tolerance on the `E`-dual norm of the restricted gradient.
    pub tol_g: f64,
    pub max_iter: usize,
    /// Exclusion radius for deflation.
    pub dedup_dist: f64,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k: 12,
            lambdas: vec![2.0, 1.5, 1.25, 1.1, 1.05, 1.01, 1.0],
            starts: 16,
            radii: Vec::new(),
            tol_g: 1e-10,
            max_iter: 200,
            dedup_dist: 1e-4,
            seed: 42,
            mode: Mode::Superquadratic,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.k == 0 {
            errs.push("k must be at least 1".to_string());
        }
        if self.lambdas.is_empty() {
            errs.push("lambda schedule is empty".to_string());
        }
        if self.lambdas.iter().any(|&l| !(l > 0.0 && l <= 2.0)) {
            errs.push("lambda schedule must lie in (0, 2]".to_string());
        }
        if self.lambdas.windows(2).any(|w| w[1] >= w[0]) {
            errs.push("lambda schedule must be strictly decreasing".to_string());
        }
        if self.lambdas.last().is_some_and(|&l| l != 1.0) {
            errs.push("lambda schedule must end at 1".to_string());
        }
        if !(self.tol_g > 0.0) || !(self.dedup_dist > 0.0) {
            errs.push("tolerances must be positive".to_string());
        }
        if self.max_iter == 0 {
            errs.push("max_iter must be at least 1".to_string());
        }
        if self.radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            errs.push("start radii must be positive".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(errs.join("; ")))
        }
    }
}

/// Geometric ladder of `count` radii from `lo` to `hi`.
pub fn default_start_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}

/// Start radii for a mode given the sphere radii `(ρ_k, r_k)` from geometry:
/// AQ spans `[0.01 r_k, 10 ρ_k]`, SQ spans `[ρ_k, r_k]`.
pub fn mode_start_radii(mode: Mode, rho_k: f64, r_k: f64, count: usize) -> Vec<f64> {
    match mode {
        Mode::Asymptotic => default_start_radii(0.01 * r_k, 10.0 * rho_k, count),
        Mode::Superquadratic => default_start_radii(rho_k.min(r_k), r_k.max(rho_k), count),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    #[serde(skip)]
    pub u: GridFunction,
    pub lambda: f64,
    pub k: usize,
    pub value: f64,
    /// `E`-dual norm of `Φ'_λ|_{Y_k}(u)`.
    pub grad_norm: f64,
    pub norm_e: f64,
    pub residual: ResidualReport,
    /// Negative eigenvalues of the restricted Hessian.
    pub morse: Option<usize>,
    pub trivial: bool,
    pub iterations: usize,
}

struct Newton<'a> {
    ctx: &'a FunctionalContext,
    sub: Subspace,
    lambda: f64,
    weights: Vec<f64>,
}

impl Newton<'_> {
    fn residual(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.ctx.reduced_gradient(&self.sub, x, self.lambda)
    }

    /// `max_i |Φ'_λ(u) e_i|` from reduced coordinates.
    fn weak_max(&self, f: &DVector<f64>) -> f64 {
        f.iter().zip(&self.weights).map(|(v, w)| (v * w.sqrt()).abs()).fold(0.0, f64::max)
    }

    fn converged(&self, f: &DVector<f64>, x: &DVector<f64>, tol: f64) -> bool {
        f.norm() <= tol && self.weak_max(f) <= tol * (1.0 + x.norm())
    }
}

fn pseudo_solve(j: &DMatrix<f64>, f: &DVector<f64>) -> (DVector<f64>, usize) {
    let eig = SymmetricEigen::new(j.clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = 1e-9 * scale.max(1e-300);
    let mut step = DVector::zeros(f.len());
    let mut negative = 0;
    for (i, &mu) in eig.eigenvalues.iter().enumerate() {
        if mu < -cut {
            negative += 1;
        }
        if mu.abs() > cut {
            let v = eig.eigenvectors.column(i);
            step -= v * (v.dot(f) / mu);
        }
    }
    (step, negative)
}

fn morse_index(j: &DMatrix<f64>) -> usize {
    pseudo_solve(j, &DVector::zeros(j.nrows())).1
}

/// Newton iteration for `Φ'_λ|_{Y_k}(u) = 0` from `u0` (projected onto `Y_k`).
pub fn find_critical(
    ctx: &FunctionalContext,
    u0: &GridFunction,
    lambda: f64,
    k: usize,
    config: &SolverConfig,
) -> Result<CriticalPoint> {
    let dec = ctx.dec();
    let sub = Subspace::leading(dec, k)?;
    let mut x = sub.coordinates(dec, u0)?;
    let weights = sub.indices().iter().map(|&i| dec.weights()[i]).collect();
    let newton = Newton { ctx, sub, lambda, weights };
    let tol = config.tol_g;
    let mut f = newton.residual(&x)?;
    let mut iterations = 0;
    let mut mu_lm = 1e-3;
    // Once the gradient test holds, Newton steps continue until they become
    // negligible or stop making progress, so that degenerate zeros (where
    // the gradient vanishes to high order) are not accepted early.
    loop {
        let small = newton.converged(&f, &x, tol);
        if small && x.norm() == 0.0 {
            break;
        }
        if iterations >= config.max_iter {
            if small {
                break;
            }
            return Err(Error::NotConverged {
                iterations,
                grad_norm: f.norm(),
                last_iterate: newton.sub.to_grid(&x).into_values().as_slice().to_vec(),
            });
        }
        let fnorm = f.norm();
        let jac = ctx.reduced_hessian(&newton.sub, &x, lambda)?;
        let (dx, _) = pseudo_solve(&jac, &f);
        if small && dx.norm() <= 1e-10 * (1.0 + x.norm()) {
            break;
        }
        iterations += 1;
        let mut accepted = None;
        let mut alpha = 1.0;
        for _ in 0..30 {
            let trial = &x + &dx * alpha;
            if let Ok(ft) = newton.residual(&trial) {
                if ft.norm() < (1.0 - 1e-4 * alpha) * fnorm {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            alpha *= 0.5;
        }
        if accepted.is_none() && !small {
            // Levenberg–Marquardt on ½|F|²
            let jtj = jac.transpose() * &jac;
            let jtf = jac.transpose() * &f;
            for _ in 0..40 {
                let mut m = jtj.clone();
                let damp = mu_lm * (1.0 + jtj.diagonal().amax());
                for i in 0..m.nrows() {
                    m[(i, i)] += damp;
                }
                if let Some(chol) = m.cholesky() {
                    let trial = &x - chol.solve(&jtf);
                    if let Ok(ft) = newton.residual(&trial) {
                        if ft.norm() < fnorm {
                            accepted = Some((trial, ft));
                            mu_lm = (mu_lm * 0.3).max(1e-12);
                            break;
                        }
                    }
                }
                mu_lm *= 10.0;
            }
        }
        match accepted {
            Some((xn, fnew)) => {
                x = xn;
                f = fnew;
            }
            None if small => break,
            None => {
                debug!("newton stagnated at |F| = {fnorm:.3e} after {iterations} iterations");
                return Err(Error::NotConverged {
                    iterations,
                    grad_norm: fnorm,
                    last_iterate: newton.sub.to_grid(&x).into_values().as_slice().to_vec(),
                });
            }
        }
    }
    let u = newton.sub.to_grid(&x);
    let jac = ctx.reduced_hessian(&newton.sub, &x, lambda)?;
    let norm_e = x.norm();
    Ok(CriticalPoint {
        value: ctx.reduced_value(&newton.sub, &x, lambda)?,
        residual: strong_residual(ctx, &u)?,
        grad_norm: f.norm(),
        norm_e,
        morse: Some(morse_index(&jac)),
        trivial: norm_e < TRIVIAL_NORM,
        lambda,
        k,
        iterations,
        u,
    })
}

/// Canonical representative of `{u, -u}`: the first significant `E`-coordinate
/// is made positive.
fn canonical_sign(ctx: &FunctionalContext, u: &GridFunction) -> Result<f64> {
    let c = ctx.dec().coefficients(u)?;
    let w = ctx.dec().weights();
    let scaled: Vec<f64> = c.iter().zip(w).map(|(c, w)| c * w.sqrt()).collect();
    let norm = scaled.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(scaled
        .iter()
        .find(|v| v.abs() > 1e-6 * norm)
        .map_or(1.0, |v| v.signum()))
}

/// `E`-distance between `u` and `v` modulo the sign (for even potentials)
/// and the time shift (for autonomous problems).
pub fn orbit_distance(ctx: &FunctionalContext, u: &GridFunction, v: &GridFunction) -> Result<f64> {
    let dec = ctx.dec();
    let even = ctx.potential().is_even();
    let mut best = dec.e_norm(&u.axpy(-1.0, v)?)?;
    if even {
        best = best.min(dec.e_norm(&u.axpy(1.0, v)?)?);
    }
    if ctx.is_autonomous() {
        let iu = TrigInterpolant::new(u);
        let iv = TrigInterpolant::new(v);
        let (s, sigma) = iv.best_shift(&iu, even);
        let shifted = iv.shifted(s).scaled(sigma);
        best = best.min(dec.e_norm(&u.axpy(-1.0, &shifted)?)?);
    }
    Ok(best)
}

/// Whether the whole ray through `u` is critical, as for kernel elements of
/// a purely linear problem. Such continua are not isolated solutions.
fn is_linear_continuum(ctx: &FunctionalContext, cp: &CriticalPoint, tol: f64) -> Result<bool> {
    let sub = Subspace::leading(ctx.dec(), cp.k)?;
    let x = sub.coordinates(ctx.dec(), &cp.u)?;
    for s in [0.5, 2.0] {
        let f = ctx.reduced_gradient(&sub, &(&x * s), cp.lambda)?;
        if f.norm() > tol * (1.0 + s * cp.norm_e) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct MultistartDiagnostics {
    pub starts: usize,
    pub converged: usize,
    pub failed: usize,
    pub trivial: usize,
    /// Points on a ray of numerically critical points through the origin:
    /// kernel elements of linear problems and near-trivial points at
    /// degenerate zeros.
    pub flat: usize,
    pub duplicates: usize,
    /// Smallest pairwise orbit distance among the reported points.
    pub min_pair_distance: Option<f64>,
    /// Smallest pairwise `|ΔΦ|` among the reported points.
    pub min_value_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultistartResult {
    pub points: Vec<CriticalPoint>,
    pub diagnostics: MultistartDiagnostics,
}

/// Starts on `Y_k`-spheres: `±r ê_i` along every coordinate and
/// `config.starts` seeded random directions, for every radius.
fn start_points(ctx: &FunctionalContext, k: usize, config: &SolverConfig) -> Result<Vec<GridFunction>> {
    let sub = Subspace::leading(ctx.dec(), k)?;
    let radii = if config.radii.is_empty() {
        default_start_radii(1e-2, 1e2, 9)
    } else {
        config.radii.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::new();
    for &r in &radii {
        for i in 0..k {
            let mut x = DVector::zeros(k);
            x[i] = r;
            out.push(sub.to_grid(&x));
            if !ctx.potential().is_even() {
                x[i] = -r;
                out.push(sub.to_grid(&x));
            }
        }
        for _ in 0..config.starts {
            let mut x = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
            let n = x.norm();
            if n > 0.0 {
                x *= r / n;
            }
            out.push(sub.to_grid(&x));
        }
    }
    Ok(out)
}

/// Multi-start search for distinct nontrivial critical points of `Φ_λ|_{Y_k}`,
/// sorted by `(Φ, ‖u‖)`. Sign pairs (even potentials) and time shifts
/// (autonomous problems) are identified.
pub fn multistart_collect(ctx: &FunctionalContext, lambda: f64, k: usize, config: &SolverConfig) -> Result<MultistartResult> {
    config.validate()?;
    let starts = start_points(ctx, k, config)?;
    let outcomes: Vec<Result<CriticalPoint>> =
        starts.par_iter().map(|u0| find_critical(ctx, u0, lambda, k, config)).collect();
    let mut diag = MultistartDiagnostics { starts: starts.len(), ..Default::default() };
    let mut found = Vec::new();
    for res in outcomes {
        match res {
            Ok(cp) if cp.trivial => {
                diag.converged += 1;
                diag.trivial += 1;
            }
            Ok(cp) => {
                diag.converged += 1;
                if is_linear_continuum(ctx, &cp, config.tol_g)? {
                    diag.flat += 1;
                } else {
                    found.push(cp);
                }
            }
            Err(Error::NotConverged { .. }) => diag.failed += 1,
            Err(e) => return Err(e),
        }
    }
    found.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.norm_e.total_cmp(&b.norm_e))
    });
    let mut kept: Vec<CriticalPoint> = Vec::new();
    for mut cp in found {
        let mut duplicate = false;
        for other in &kept {
            if orbit_distance(ctx, &cp.u, &other.u)? <= config.dedup_dist {
                duplicate = true;
                break;
            }
        }
        if duplicate {
            diag.duplicates += 1;
            continue;
        }
        if ctx.potential().is_even() && canonical_sign(ctx, &cp.u)? < 0.0 {
            cp.u = cp.u.scaled(-1.0);
        }
        kept.push(cp);
    }
    for i in 0..kept.len() {
        for j in 0..i {
            let d = orbit_distance(ctx, &kept[i].u, &kept[j].u)?;
            let g = (kept[i].value - kept[j].value).abs();
            diag.min_pair_distance = Some(diag.min_pair_distance.map_or(d, |m| m.min(d)));
            diag.min_value_gap = Some(diag.min_value_gap.map_or(g, |m| m.min(g)));
        }
    }
    if kept.is_empty() {
        warn!("multistart found no nontrivial critical points ({} starts)", diag.starts);
    }
    Ok(MultistartResult { points: kept, diagnostics: diag })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchStatus {
    ConvergedToOne,
    Lost,
    Diverged,
}

#[derive(Debug, Clone, Serialize)]
pub struct Branch {
    pub points: Vec<CriticalPoint>,
    pub status: BranchStatus,
}

impl Branch {
    /// `(λ_n, Φ_{λ_n}(u_n))` along the branch.
    pub fn values(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.lambda, p.value)).collect()
    }

    pub fn last(&self) -> Option<&CriticalPoint> {
        self.points.last()
    }

    /// Whether the limiting value lies in `[lo, hi]` (the AQ bracket
    /// `[ξ_k(2), β_k(1)]`).
    pub fn value_in_bracket(&self, lo: f64, hi: f64) -> Option<bool> {
        match (self.status, self.last()) {
            (BranchStatus::ConvergedToOne, Some(p)) => Some(p.value >= lo && p.value <= hi),
            _ => None,
        }
    }
}

/// Norm growth factor along a branch beyond which it is declared diverged.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Predictor–corrector continuation of `cp` along the remaining `λ` schedule.
/// A corrector that fails or jumps further than the trust distance
/// `0.5(1 + ‖u‖)` is retried with halved `λ` steps (at most 6 halvings).
pub fn continue_branch(ctx: &FunctionalContext, cp: &CriticalPoint, config: &SolverConfig) -> Result<Branch> {
    config.validate()?;
    let mut points = vec![cp.clone()];
    let targets: Vec<f64> = config.lambdas.iter().cloned().filter(|&l| l < cp.lambda).collect();
    let start_norm = cp.norm_e.max(1e-300);
    for target in targets {
        let mut depth = 0;
        loop {
            let prev = points.last().expect("nonempty branch");
            let step_lambda = prev.lambda - (prev.lambda - target) / f64::powi(2.0, depth);
            let outcome = find_critical(ctx, &prev.u, step_lambda, cp.k, config);
            let ok = match &outcome {
                Ok(next) => {
                    let jump = ctx.dec().e_norm(&next.u.axpy(-1.0, &prev.u)?)?;
                    jump <= 0.5 * (1.0 + prev.norm_e)
                }
                Err(_) => false,
            };
            if ok {
                let next = outcome?;
                if next.norm_e > DIVERGENCE_FACTOR * (1.0 + start_norm) {
                    points.push(next);
                    return Ok(Branch { points, status: BranchStatus::Diverged });
                }
                let reached = next.lambda == target;
                points.push(next);
                if reached {
                    break;
                }
                depth = 0;
            } else if depth < 6 {
                depth += 1;
            } else {
                return Ok(Branch { points, status: BranchStatus::Lost });
            }
        }
    }
    let status = if points.last().is_some_and(|p| p.lambda == 1.0) {
        BranchStatus::ConvergedToOne
    } else {
        BranchStatus::Lost
    };
    Ok(Branch { points, status })
}

#[derive(Debug, Clone, Serialize)]
pub struct Refinement {
    pub point: CriticalPoint,
    /// `‖u_{k'} - u_k‖` after lifting `u_k` to the finer grid.
    pub increment: f64,
    pub flagged: bool,
}

/// Increments above this fraction of `1 + ‖u‖` are flagged as unresolved.
pub const REFINEMENT_FLAG: f64 = 1e-3;

/// Re-solves `cp` on `Y_{k'}` of the finer context `fine` (same period,
/// at least as many nodes) starting from the trigonometric lift of `cp.u`.
pub fn refine_level(fine: &FunctionalContext, cp: &CriticalPoint, k_new: usize, config: &SolverConfig) -> Result<Refinement> {
    let (gc, gf) = (cp.u.grid(), fine.grid());
    if gf.nodes() < gc.nodes() || gf.period() != gc.period() || gf.dim() != gc.dim() {
        return Err(Error::GridMismatch("refinement needs a finer grid on the same loop".into()));
    }
    if k_new < cp.k {
        return Err(Error::InvalidArgument(format!("refinement level {k_new} below {}", cp.k)));
    }
    let lifted = TrigInterpolant::new(&cp.u).resample(gf.nodes())?;
    let point = find_critical(fine, &lifted, cp.lambda, k_new, config)?;
    let increment = fine.dec().e_norm(&point.u.axpy(-1.0, &lifted)?)?;
    let flagged = increment > REFINEMENT_FLAG * (1.0 + point.norm_e);
    Ok(Refinement { point, increment, flagged })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundednessReport {
    /// Exponents of the fitted bound `‖u‖² ≤ Σ c_e ‖u‖^e`.
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// Largest norm compatible with the fitted bound on the full history.
    pub bound: f64,
    /// The same for the history without its last point.
    pub previous_bound: Option<f64>,
    pub passes: bool,
}

fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let p = a.ncols();
    let mut best = DVector::zeros(p);
    let mut best_res = b.norm_squared();
    for mask in 1u32..(1 << p) {
        let cols: Vec<usize> = (0..p).filter(|i| mask & (1 << i) != 0).collect();
        let sub = DMatrix::from_fn(a.nrows(), cols.len(), |r, c| a[(r, cols[c])]);
        let Some(sol) = sub.clone().svd(true, true).solve(b, 1e-12).ok() else { continue };
        if sol.iter().any(|&v| v < 0.0) {
            continue;
        }
        let res = (&sub * &sol - b).norm_squared();
        if res < best_res {
            best_res = res;
            best = DVector::zeros(p);
            for (c, &col) in cols.iter().enumerate() {
                best[col] = sol[c];
            }
        }
    }
    best
}

fn fitted_bound(norms: &[f64], exponents: &[f64]) -> (Vec<f64>, f64) {
    let a = DMatrix::from_fn(norms.len(), exponents.len(), |r, c| norms[r].powf(exponents[c]));
    let b = DVector::from_iterator(norms.len(), norms.iter().map(|x| x * x));
    let mut coef = nnls(&a, &b);
    // raise the constant term until the bound holds at every sample
    let slack = (0..norms.len())
        .map(|r| b[r] - (a.row(r) * &coef)[0])
        .fold(0.0f64, f64::max);
    coef[0] += slack;
    let g = |x: f64| x * x - exponents.iter().zip(coef.iter()).map(|(e, c)| c * x.powf(*e)).sum::<f64>();
    let mut hi = norms.iter().cloned().fold(1.0, f64::max);
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (coef.iter().cloned().collect(), hi)
}

/// Fits the self-bounding shape `‖u_n‖² ≤ a + b‖u_n‖^μ` (AQ, `growth = μ`)
/// or `‖u_n‖² ≤ a + b‖u_n‖ + c‖u_n‖^{ν-ϱ}` (SQ, `growth = ν - ϱ`) to a
/// branch history. The diagnostic passes when the implied a-priori bound
/// has stabilized: adding the last point grows it by at most 50%.
pub fn boundedness_diagnostics(norms: &[f64], mode: Mode, growth: f64) -> Result<BoundednessReport> {
    if !(growth < 2.0) {
        return Err(Error::ParameterDomain(format!("bound exponent {growth} must be below 2")));
    }
    if norms.is_empty() || norms.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidArgument("branch norms must be finite and nonnegative".into()));
    }
    let mut exponents = vec![0.0];
    if mode == Mode::Superquadratic {
        exponents.push(1.0);
    }
    if growth > 0.0 && !exponents.contains(&growth) {
        exponents.push(growth);
    }
    let (coefficients, bound) = fitted_bound(norms, &exponents);
    let previous_bound = (norms.len() >= 3).then(|| fitted_bound(&norms[..norms.len() - 1], &exponents).1);
    let passes = previous_bound.is_none_or(|p| bound <= 1.5 * p);
    Ok(BoundednessReport { exponents, coefficients, bound, previous_bound, passes })
}
