//! Fountain geometry per Galerkin level: embedding constants `ℓ_k`,
//! `ℓ_ν(k)`, radii `ρ_k`, `r_k`, and empirical sphere/ball extrema of `Φ_λ`
//! with the certified bounds they are compared against.

use nalgebra::{DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;

use crate::audit::SampleScheme;
use crate::error::{Error, Result};
use crate::functional::{FunctionalContext, Subspace};
use crate::potential::{Hypotheses, Mode, Potential};
use crate::spectral::SpectralDecomposition;

/// `sup_{t_j} sup_{‖u‖=1, u ∈ span} |u(t_j)|` over the grid nodes.
pub fn tau_inf(dec: &SpectralDecomposition, sub: &Subspace) -> f64 {
    let grid = dec.grid();
    let n = grid.dim();
    let b = sub.scaled_basis();
    let mut best = 0.0f64;
    for j in 0..grid.nodes() {
        let rows = b.rows(j * n, n);
        let gram = &rows * rows.transpose();
        let top = SymmetricEigen::new(gram).eigenvalues.max();
        best = best.max(top.max(0.0).sqrt());
    }
    best
}

/// Global `τ₂ = sup |u|₂/‖u‖ = max_i w_i^{-1/2}`.
pub fn tau_two(dec: &SpectralDecomposition) -> f64 {
    dec.weights().iter().map(|w| 1.0 / w.sqrt()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct LpSup {
    pub p: f64,
    /// Best value found by the optimizer: a lower bound on the supremum.
    pub empirical: f64,
    /// Smallest of the certified upper bounds.
    pub certified: f64,
    /// `√T λ_k^{-1/2}` (`p = 1` only).
    pub certified_simple: Option<f64>,
    pub starts: usize,
}

fn lp_value_grad(sub: &Subspace, h: f64, n: usize, x: &DVector<f64>, p: f64) -> (f64, DVector<f64>) {
    let b = sub.scaled_basis();
    let u = b * x;
    let mut sum = 0.0;
    let mut w = DVector::zeros(u.len());
    for j in 0..u.len() / n {
        let node = u.rows(j * n, n);
        let r = node.norm();
        if r > 0.0 {
            sum += r.powf(p);
            let s = r.powf(p - 2.0);
            for a in 0..n {
                w[j * n + a] = s * node[a];
            }
        }
    }
    let val = (h * sum).powf(1.0 / p);
    if val == 0.0 {
        return (0.0, DVector::zeros(x.len()));
    }
    // d/dx (h Σ r^p)^{1/p} = (h Σ r^p)^{1/p - 1} h Σ r^{p-2} Bᵀ u
    let g = b.tr_mul(&w) * (h * (h * sum).powf(1.0 / p - 1.0));
    (val, g)
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(&mut *rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// `sup_{u ∈ Z_k, ‖u‖ = 1} |u|_p` (1-based `k ≥ n̄ + 1`): normalized-gradient
/// ascent of the convex `|u|_p` from `starts` seeded and axis starts, with
/// the certified bounds `T^{1/p}τ_∞(Z_k)`, `T^{1/p-1/2}λ_k^{-1/2}` (`p ≤ 2`)
/// and `τ_∞^{1-2/p}λ_k^{-1/p}` (`p > 2`).
pub fn sphere_sup_lp(dec: &SpectralDecomposition, k: usize, p: f64, starts: usize, seed: u64) -> Result<LpSup> {
    if k < dec.n_bar() + 1 {
        return Err(Error::OutsidePlusSpace { k, n_bar: dec.n_bar() });
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p = {p} must be a finite exponent >= 1")));
    }
    let sub = Subspace::tail(dec, k)?;
    let grid = dec.grid();
    let (h, n, period) = (grid.spacing(), grid.dim(), grid.period());
    let d = sub.dim();
    let lam = dec.eigenvalues()[k - 1];
    let tinf = tau_inf(dec, &sub);
    let mut cert = period.powf(1.0 / p) * tinf;
    if p <= 2.0 {
        cert = cert.min(period.powf(1.0 / p - 0.5) / lam.sqrt());
    } else {
        cert = cert.min(tinf.powf(1.0 - 2.0 / p) * lam.powf(-1.0 / p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9));
    let mut init: Vec<DVector<f64>> = (0..d.min(starts / 2 + 1))
        .map(|i| {
            let mut x = DVector::zeros(d);
            x[i] = 1.0;
            x
        })
        .collect();
    while init.len() < starts.max(1) {
        init.push(random_unit(&mut rng, d));
    }
    let best = init
        .par_iter()
        .map(|x0| {
            let mut x = x0.clone();
            let (mut f, mut g) = lp_value_grad(&sub, h, n, &x, p);
            for _ in 0..500 {
                let gn = g.norm();
                if gn == 0.0 {
                    break;
                }
                let xn = &g / gn;
                let (fn_, gnew) = lp_value_grad(&sub, h, n, &xn, p);
                if fn_ <= f * (1.0 + 1e-15) {
                    break;
                }
                x = xn;
                f = fn_;
                g = gnew;
            }
            let _ = x;
            f
        })
        .reduce(|| 0.0, f64::max);
    let certified_simple = (p == 1.0).then(|| period.sqrt() / lam.sqrt());
    Ok(LpSup { p, empirical: best, certified: cert, certified_simple, starts: init.len() })
}

/// `ρ_k = factor·c₂·ℓ_k` (default factor 8).
pub fn rho_aq(ell: f64, c2: f64, factor: f64) -> f64 {
    factor * c2 * ell
}

/// `ρ_k = (16 a₁ ℓ_ν^ν)^{1/(2-ν)}` for `ν > 2`.
pub fn rho_sq(ell_nu: f64, a1: f64, nu: f64) -> Result<f64> {
    if !(nu > 2.0) {
        return Err(Error::ParameterDomain(format!("nu = {nu}: nu must exceed 2 (SQ1)")));
    }
    Ok((16.0 * a1 * ell_nu.powf(nu)).powf(1.0 / (2.0 - nu)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, Serialize)]
pub struct Extremum {
    pub value: f64,
    #[serde(skip)]
    pub point: DVector<f64>,
    pub starts: usize,
    pub median: f64,
    /// `|best - median|`.
    pub spread: f64,
    /// Starts that hit the iteration cap before their stationarity test.
    pub stagnated: usize,
}

/// Riemannian gradient descent (`Min`) or ascent (`Max`) of `Φ_λ` on the
/// sphere `‖u‖ = radius` of `sub`, with Armijo backtracking. `extra`
/// starts are tried in addition to the seeded random ones.
#[allow(clippy::too_many_arguments)]
pub fn sphere_extrema(
    ctx: &FunctionalContext,
    sub: &Subspace,
    radius: f64,
    lambda: f64,
    sense: Sense,
    starts: usize,
    seed: u64,
    extra: &[DVector<f64>],
) -> Result<Extremum> {
    optimize(ctx, sub, radius, lambda, sense, starts, seed, extra, false)
}

/// Projected gradient descent of `Φ_λ` over the ball `‖u‖ ≤ radius` of `sub`.
pub fn ball_infimum(
    ctx: &FunctionalContext,
    sub: &Subspace,
    radius: f64,
    lambda: f64,
    starts: usize,
    seed: u64,
    extra: &[DVector<f64>],
) -> Result<Extremum> {
    optimize(ctx, sub, radius, lambda, Sense::Min, starts, seed, extra, true)
}

#[allow(clippy::too_many_arguments)]
fn optimize(
    ctx: &FunctionalContext,
    sub: &Subspace,
    radius: f64,
    lambda: f64,
    sense: Sense,
    starts: usize,
    seed: u64,
    extra: &[DVector<f64>],
    ball: bool,
) -> Result<Extremum> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius {radius} must be positive")));
    }
    let d = sub.dim();
    let sign = match sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init: Vec<DVector<f64>> = Vec::new();
    for e in extra {
        if e.len() == d && e.norm() > 0.0 {
            init.push(e * (radius / e.norm()));
        }
    }
    for i in 0..d.min(starts / 4) {
        let mut x = DVector::zeros(d);
        x[i] = radius;
        init.push(x);
    }
    while init.len() < starts.max(1) + extra.len().min(starts) {
        let x = random_unit(&mut rng, d) * radius;
        if ball {
            let s: f64 = rand::Rng::random(&mut rng);
            init.push(x * s.powf(1.0 / d as f64));
        } else {
            init.push(x);
        }
    }
    let project = |x: DVector<f64>| -> DVector<f64> {
        let n = x.norm();
        if ball {
            if n > radius {
                x * (radius / n)
            } else {
                x
            }
        } else {
            x * (radius / n.max(f64::MIN_POSITIVE))
        }
    };
    let f = |x: &DVector<f64>| ctx.reduced_value(sub, x, lambda).map(|v| sign * v);
    let results: Vec<Result<(f64, DVector<f64>, bool)>> = init
        .par_iter()
        .map(|x0| {
            let mut x = project(x0.clone());
            let mut fx = f(&x)?;
            let mut step = 1.0 / (1.0 + lambda);
            for _ in 0..2000 {
                let g = ctx.reduced_gradient(sub, &x, lambda)? * sign;
                let dir = if ball {
                    // projected-gradient stationarity: tangential on the boundary
                    // when the gradient points outward
                    let on_boundary = x.norm() >= radius * (1.0 - 1e-12);
                    if on_boundary && g.dot(&x) < 0.0 {
                        -(&g - &x * (g.dot(&x) / (radius * radius)))
                    } else {
                        -g.clone()
                    }
                } else {
                    -(&g - &x * (g.dot(&x) / (radius * radius)))
                };
                let dn = dir.norm();
                if dn * radius <= 1e-10 * (1.0 + fx.abs()) || dn == 0.0 {
                    return Ok((fx, x, false));
                }
                let mut accepted = false;
                let mut t = step;
                for _ in 0..60 {
                    let trial = project(&x + &dir * t);
                    let ft = f(&trial)?;
                    let moved = (&trial - &x).norm();
                    if ft <= fx - 1e-4 * dn * moved {
                        let gain = fx - ft;
                        x = trial;
                        fx = ft;
                        accepted = true;
                        step = t * 2.0;
                        if gain <= 1e-15 * (1.0 + fx.abs()) {
                            return Ok((fx, x, false));
                        }
                        break;
                    }
                    t *= 0.5;
                }
                if !accepted {
                    return Ok((fx, x, false));
                }
            }
            Ok((fx, x, true))
        })
        .collect();
    let mut vals = Vec::with_capacity(results.len());
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut stagnated = 0;
    for r in results {
        let (v, x, stag) = r?;
        if stag {
            stagnated += 1;
        }
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, x.clone()));
        }
        vals.push(v * sign);
    }
    let (bv, bx) = best.expect("at least one start");
    vals.sort_by(f64::total_cmp);
    let median = vals[vals.len() / 2];
    let value = bv * sign;
    Ok(Extremum { value, point: bx, starts: vals.len(), median, spread: (value - median).abs(), stagnated })
}

/// `C_k`: the largest constant with `|u|₂ ≥ C_k‖u‖` on `Y_k`, from the
/// generalized eigenproblem of the `L²` Gram matrix against the `E` Gram
/// matrix (the identity in `E`-isometric coordinates).
pub fn c_k(dec: &SpectralDecomposition, k: usize) -> Result<f64> {
    let sub = Subspace::leading(dec, k)?;
    let gram = sub.scaled_basis().tr_mul(sub.scaled_basis()) * dec.grid().spacing();
    let min = SymmetricEigen::new(gram).eigenvalues.min();
    if !(min > 0.0) {
        return Err(Error::InvalidArgument("degenerate L2 Gram matrix on Y_k".into()));
    }
    Ok(min.sqrt())
}

/// `δ_k`: the largest ladder radius such that `W ≥ |u|²/C_k²` holds on
/// every sample with `|u|` up to it, or `None` if the smallest shell fails.
pub fn delta_k(pot: &dyn Potential, scheme: &SampleScheme, ck: f64) -> Option<f64> {
    let mut last = None;
    for &r in &scheme.radii {
        let ok = scheme.directions.iter().all(|d| {
            let u: Vec<f64> = d.iter().map(|x| r * x).collect();
            scheme.times.iter().all(|&t| pot.value(t, &u) >= r * r / (ck * ck))
        });
        if !ok {
            break;
        }
        last = Some(r);
    }
    last
}

/// `S_k`: the smallest ladder radius beyond which `W ≥ |u|²/ε³` on every
/// sample, or `None` if the largest shell fails.
pub fn s_k(pot: &dyn Potential, scheme: &SampleScheme, eps: f64) -> Option<f64> {
    let mut first = None;
    for &r in scheme.radii.iter().rev() {
        let ok = scheme.directions.iter().all(|d| {
            let u: Vec<f64> = d.iter().map(|x| r * x).collect();
            scheme.times.iter().all(|&t| pot.value(t, &u) >= r * r / eps.powi(3))
        });
        if !ok {
            break;
        }
        first = Some(r);
    }
    first
}

/// Empirical `ε_k`: the largest `ε` with `m({t : |u(t)| ≥ ε‖u‖}) ≥ ε` for
/// all sampled unit `u ∈ Y_k` (axis directions plus `samples` random ones),
/// by bisection. Not certified: the infimum over `Y_k` is only sampled.
pub fn eps_k(dec: &SpectralDecomposition, k: usize, samples: usize, seed: u64) -> Result<f64> {
    let sub = Subspace::leading(dec, k)?;
    let grid = dec.grid();
    let (h, n) = (grid.spacing(), grid.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<DVector<f64>> = (0..k)
        .map(|i| {
            let mut x = DVector::zeros(k);
            x[i] = 1.0;
            x
        })
        .collect();
    for _ in 0..samples {
        xs.push(random_unit(&mut rng, k));
    }
    let mags: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let u = sub.scaled_basis() * x;
            (0..grid.nodes()).map(|j| u.rows(j * n, n).norm()).collect()
        })
        .collect();
    let measure_ok = |eps: f64| {
        mags.iter()
            .all(|m| h * m.iter().filter(|&&v| v >= eps).count() as f64 >= eps)
    };
    let (mut lo, mut hi) = (0.0, grid.period());
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if measure_ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryConfig {
    pub mode: Mode,
    pub k_min: usize,
    pub k_max: usize,
    pub lambdas: Vec<f64>,
    pub starts: usize,
    pub seed: u64,
    /// The constant in `ρ_k = factor·c₂·ℓ_k` (AQ).
    pub rho_factor: f64,
    /// Random samples in the `ε_k` estimate.
    pub eps_samples: usize,
}

impl GeometryConfig {
    pub fn new(mode: Mode, k_min: usize, k_max: usize) -> Self {
        Self {
            mode,
            k_min,
            k_max,
            lambdas: vec![1.0, 2.0],
            starts: 64,
            seed: 42,
            rho_factor: 8.0,
            eps_samples: 512,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    pub k: usize,
    pub lambda: f64,
    /// `ℓ_k` (AQ, `p = 1`) or `ℓ_ν(k)` (SQ, `p = ν`).
    pub ell_emp: f64,
    pub ell_cert: f64,
    /// `√T λ_k^{-1/2}` (the simple `p = 1` certificate).
    pub ell_simple: Option<f64>,
    pub rho: f64,
    pub r: Option<f64>,
    pub alpha_hat: f64,
    /// Certified lower bound for `α_k` when the level qualifies.
    pub alpha_floor: f64,
    pub beta_hat: Option<f64>,
    /// `-r_k²/2`.
    pub beta_bound: Option<f64>,
    pub xi_hat: Option<f64>,
    pub c_k: f64,
    /// `δ_k` (AQ) or `S_k` (SQ).
    pub delta_or_s: Option<f64>,
    pub eps_k: Option<f64>,
    pub tau_inf_z: f64,
    pub tau_inf: f64,
    pub alpha_meta: Extremum,
    pub beta_meta: Option<Extremum>,
    pub flags: BTreeMap<String, bool>,
}

impl GeometryReport {
    /// Flags as `name` (pass) or `!name` (fail), `|`-separated.
    pub fn flag_string(&self) -> String {
        self.flags
            .iter()
            .map(|(k, v)| if *v { k.clone() } else { format!("!{k}") })
            .collect::<Vec<_>>()
            .join("|")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryTable {
    pub mode: Mode,
    /// First level from which the radius condition holds (`k₁` or `k₂`).
    pub k_threshold: Option<usize>,
    pub reports: Vec<GeometryReport>,
}

struct LevelData {
    k: usize,
    ell: LpSup,
    rho: f64,
    r: Option<f64>,
    c_k: f64,
    delta_or_s: Option<f64>,
    eps_k: Option<f64>,
    tau_z: f64,
    qualifies: bool,
}

/// Geometry reports for `k = k_min..=k_max` and every `λ` in the config.
pub fn geometry_table(ctx: &FunctionalContext, hyp: &Hypotheses, scheme: &SampleScheme, config: &GeometryConfig) -> Result<GeometryTable> {
    let dec = ctx.dec();
    let grid = ctx.grid();
    let period = grid.period();
    if config.k_min < dec.n_bar() + 1 || config.k_max < config.k_min || config.k_max > dec.len() {
        return Err(Error::InvalidArgument(format!(
            "k range {}..={} must lie in {}..={}",
            config.k_min,
            config.k_max,
            dec.n_bar() + 1,
            dec.len()
        )));
    }
    let tau_global = tau_inf(dec, &Subspace::new(dec, (0..dec.len()).collect())?);
    let ks: Vec<usize> = (config.k_min..=config.k_max).collect();
    let p = match config.mode {
        Mode::Asymptotic => 1.0,
        Mode::Superquadratic => hyp.nu()?,
    };
    let (c2, r2, a1, a2) = match config.mode {
        Mode::Asymptotic => (hyp.c2()?, hyp.r2()?, 0.0, 0.0),
        Mode::Superquadratic => {
            let (a1, nu) = (hyp.a1()?, hyp.nu()?);
            (0.0, 0.0, a1, crate::audit::estimate_a2(ctx.potential(), scheme, a1, nu))
        }
    };
    let tau1 = match config.mode {
        Mode::Superquadratic => period.sqrt() * tau_two(dec),
        Mode::Asymptotic => 0.0,
    };
    let mut levels: Vec<LevelData> = ks
        .par_iter()
        .map(|&k| -> Result<LevelData> {
            let ell = sphere_sup_lp(dec, k, p, config.starts, config.seed)?;
            let tau_z = tau_inf(dec, &Subspace::tail(dec, k)?);
            let ck = c_k(dec, k)?;
            Ok(LevelData { k, ell, rho: 0.0, r: None, c_k: ck, delta_or_s: None, eps_k: None, tau_z, qualifies: false })
        })
        .collect::<Result<Vec<_>>>()?;
    // Z_{k+1} ⊂ Z_k: every lower bound at a deeper level is one here too
    for i in (0..levels.len().saturating_sub(1)).rev() {
        let next = levels[i + 1].ell.empirical;
        if next > levels[i].ell.empirical {
            levels[i].ell.empirical = next;
        }
    }
    for lv in levels.iter_mut() {
        match config.mode {
            Mode::Asymptotic => {
                lv.rho = rho_aq(lv.ell.certified, c2, config.rho_factor);
                lv.qualifies = lv.rho < r2 / lv.tau_z;
                lv.delta_or_s = delta_k(ctx.potential(), scheme, lv.c_k);
                lv.r = lv.delta_or_s.map(|d| 0.5 * lv.rho.min(d / tau_global));
            }
            Mode::Superquadratic => {
                lv.rho = rho_sq(lv.ell.certified, a1, p)?;
                lv.qualifies = lv.rho > (16.0 * a1 * tau1 + 1.0).max(16.0 * a2 * period);
                let eps = eps_k(dec, lv.k, config.eps_samples, config.seed.wrapping_add(lv.k as u64))?;
                lv.eps_k = Some(eps);
                lv.delta_or_s = s_k(ctx.potential(), scheme, eps);
                lv.r = lv.delta_or_s.map(|s| 1.1 * lv.rho.max(s / eps));
            }
        }
    }
    let k_threshold = {
        let last_bad = levels.iter().rposition(|l| !l.qualifies);
        match last_bad {
            None => levels.first().map(|l| l.k),
            Some(i) => levels.get(i + 1).map(|l| l.k),
        }
    };
    let reports: Vec<Vec<GeometryReport>> = levels
        .par_iter()
        .map(|lv| level_reports(ctx, lv, config, c2, tau_global, k_threshold))
        .collect::<Result<Vec<_>>>()?;
    Ok(GeometryTable { mode: config.mode, k_threshold, reports: reports.into_iter().flatten().collect() })
}

fn level_reports(
    ctx: &FunctionalContext,
    lv: &LevelData,
    config: &GeometryConfig,
    c2: f64,
    tau_global: f64,
    k_threshold: Option<usize>,
) -> Result<Vec<GeometryReport>> {
    let dec = ctx.dec();
    let z = Subspace::tail(dec, lv.k)?;
    let y = Subspace::leading(dec, lv.k)?;
    let seed = config.seed.wrapping_add(1000 * lv.k as u64);
    let mut lambdas = config.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut alpha_pts: Vec<DVector<f64>> = Vec::new();
    let mut beta_pts: Vec<DVector<f64>> = Vec::new();
    let mut xi_pts: Vec<DVector<f64>> = Vec::new();
    for &lambda in &lambdas {
        // optimizers of smaller λ seed the larger ones, which keeps the
        // empirical extrema monotone in λ whenever B ≥ 0
        let alpha = sphere_extrema(ctx, &z, lv.rho, lambda, Sense::Min, config.starts, seed, &alpha_pts)?;
        alpha_pts.push(alpha.point.clone());
        let beta = match lv.r {
            Some(r) => {
                let b = sphere_extrema(ctx, &y, r, lambda, Sense::Max, config.starts, seed + 1, &beta_pts)?;
                beta_pts.push(b.point.clone());
                Some(b)
            }
            None => None,
        };
        let xi = match config.mode {
            Mode::Asymptotic => {
                let mut extra = xi_pts.clone();
                extra.push(alpha.point.clone());
                let b = ball_infimum(ctx, &z, lv.rho, lambda, config.starts, seed + 2, &extra)?;
                xi_pts.push(b.point.clone());
                Some(b.value.min(0.0))
            }
            Mode::Superquadratic => None,
        };
        let qualified = k_threshold.is_some_and(|k0| lv.k >= k0);
        let rho2 = lv.rho * lv.rho;
        let alpha_floor = match config.mode {
            Mode::Asymptotic => 0.25 * rho2,
            Mode::Superquadratic => 0.125 * rho2,
        };
        let beta_bound = lv.r.map(|r| -0.5 * r * r);
        let mut flags = BTreeMap::new();
        flags.insert("k_qualified".to_string(), qualified);
        flags.insert("ell_certified".to_string(), lv.ell.empirical <= lv.ell.certified * (1.0 + 1e-12));
        flags.insert("alpha_positive".to_string(), alpha.value > 0.0);
        flags.insert("alpha_ge_floor".to_string(), alpha.value >= alpha_floor * (1.0 - 1e-6));
        flags.insert("alpha_ge_rho2_over_4".to_string(), alpha.value >= 0.25 * rho2 * (1.0 - 1e-6));
        flags.insert("alpha_converged".to_string(), alpha.stagnated == 0);
        if let (Some(b), Some(bb)) = (&beta, beta_bound) {
            flags.insert("beta_negative".to_string(), b.value < 0.0);
            flags.insert("beta_le_bound".to_string(), b.value <= bb * (1.0 - 1e-6));
            flags.insert("beta_converged".to_string(), b.stagnated == 0);
        }
        match config.mode {
            Mode::Asymptotic => {
                if let Some(x) = xi {
                    let floor = -2.0 * c2 * lv.ell.certified * lv.rho;
                    flags.insert("xi_ge_floor".to_string(), x >= floor * (1.0 + 1e-6));
                }
            }
            Mode::Superquadratic => {
                if let Some(r) = lv.r {
                    flags.insert("r_gt_rho".to_string(), r > lv.rho);
                }
            }
        }
        out.push(GeometryReport {
            k: lv.k,
            lambda,
            ell_emp: lv.ell.empirical,
            ell_cert: lv.ell.certified,
            ell_simple: lv.ell.certified_simple,
            rho: lv.rho,
            r: lv.r,
            alpha_hat: alpha.value,
            alpha_floor,
            beta_hat: beta.as_ref().map(|b| b.value),
            beta_bound,
            xi_hat: xi,
            c_k: lv.c_k,
            delta_or_s: lv.delta_or_s,
            eps_k: lv.eps_k,
            tau_inf_z: lv.tau_z,
            tau_inf: tau_global,
            alpha_meta: alpha,
            beta_meta: beta,
            flags,
        });
    }
    Ok(out)
}

/// Column order of [`write_geometry_csv`].
pub const GEOMETRY_COLUMNS: [&str; 14] = [
    "k", "lambda", "ell_emp", "ell_cert", "rho", "r", "alpha_hat", "alpha_floor", "beta_hat", "xi_hat", "C_k",
    "delta_or_S", "eps_k", "flags",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.16e}"))
}

pub fn write_geometry_csv<W: Write>(table: &GeometryTable, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", GEOMETRY_COLUMNS.join(","))?;
    for r in &table.reports {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{},{},{:.16e},{},{},{}",
            r.k,
            r.lambda,
            r.ell_emp,
            r.ell_cert,
            r.rho,
            fmt_opt(r.r),
            r.alpha_hat,
            r.alpha_floor,
            fmt_opt(r.beta_hat),
            fmt_opt(r.xi_hat),
            r.c_k,
            fmt_opt(r.delta_or_s),
            fmt_opt(r.eps_k),
            r.flag_string()
        )?;
    }
    Ok(())
}

/// Rayleigh quotients `|u|₂/‖u‖` of `count` seeded random `u ∈ Y_k`.
pub fn rayleigh_samples(dec: &SpectralDecomposition, k: usize, count: usize, seed: u64) -> Result<Vec<f64>> {
    let sub = Subspace::leading(dec, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let x = random_unit(&mut rng, k);
            sub.to_grid(&x).l2_norm()
        })
        .collect())
}

/// Unused-coordinate helper kept for symmetric Gram checks in tests.
#[cfg(test)]
fn is_identity(m: &nalgebra::DMatrix<f64>, tol: f64) -> bool {
    (m - nalgebra::DMatrix::identity(m.nrows(), m.ncols())).amax() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{FnPotential, PowerPotential};
    use crate::spectral::{MatrixPath, TimeGrid};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn ctx(pot: Arc<dyn Potential>, m: usize) -> FunctionalContext {
        let grid = TimeGrid::new(2.0 * PI, m, 1).unwrap();
        FunctionalContext::build(grid, MatrixPath::zero(&grid), pot).unwrap()
    }

    #[test]
    fn certified_l1_closed_form() {
        let c = ctx(Arc::new(FnPotential::zero(1)), 32);
        let dec = c.dec();
        assert!((dec.eigenvalues()[3] - 4.0).abs() < 1e-10);
        let s = sphere_sup_lp(dec, 4, 1.0, 16, 1).unwrap();
        assert!((s.certified_simple.unwrap() - (2.0 * PI).sqrt() / 2.0).abs() < 1e-9);
        assert!(s.empirical <= s.certified * (1.0 + 1e-12));
        assert!(s.empirical > 0.0);
        match sphere_sup_lp(dec, 1, 1.0, 4, 1) {
            Err(Error::OutsidePlusSpace { k: 1, n_bar: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rho_arithmetic() {
        assert!((rho_aq(0.1, 1.0, 8.0) - 0.8).abs() < 1e-15);
        assert!((rho_sq(0.1, 1.0, 4.0).unwrap() - 25.0).abs() < 1e-10);
        assert!(rho_sq(0.1, 1.0, 2.0).is_err());
    }

    #[test]
    fn pure_quadratic_sphere_minimum() {
        let c = ctx(Arc::new(FnPotential::zero(1)), 16);
        let z = Subspace::tail(c.dec(), 3).unwrap();
        for rho in [0.3, 2.0] {
            let e = sphere_extrema(&c, &z, rho, 1.0, Sense::Min, 8, 3, &[]).unwrap();
            assert!((e.value - 0.5 * rho * rho).abs() < 1e-13);
        }
    }

    #[test]
    fn c_k_examples() {
        let c = ctx(Arc::new(FnPotential::zero(1)), 16);
        assert!((c_k(c.dec(), 1).unwrap() - 1.0).abs() < 1e-12);
        assert!((c_k(c.dec(), 5).unwrap() - 0.5).abs() < 1e-12);
        let ck = c_k(c.dec(), 9).unwrap();
        for q in rayleigh_samples(c.dec(), 9, 100, 5).unwrap() {
            assert!(q >= ck * (1.0 - 1e-10));
        }
        let sub = Subspace::leading(c.dec(), 9).unwrap();
        let gram = sub.scaled_basis().tr_mul(sub.scaled_basis()) * c.grid().spacing();
        let w = nalgebra::DMatrix::from_diagonal(&DVector::from_iterator(9, c.dec().weights()[..9].iter().cloned()));
        assert!(is_identity(&(&w * gram), 1e-10));
    }

    #[test]
    fn delta_for_three_halves() {
        let w = PowerPotential::new(1.0, 1.5, 1).unwrap();
        let grid = TimeGrid::new(2.0 * PI, 8, 1).unwrap();
        let scheme = SampleScheme::for_grid(&grid, 42).unwrap();
        assert_eq!(delta_k(&w, &scheme, 1.0), Some(1.0));
        let q = PowerPotential::new(0.25, 4.0, 1).unwrap();
        let s = s_k(&q, &scheme, 0.5).unwrap();
        // ¼r⁴ ≥ 8r² ⟺ r ≥ √32
        assert!(s >= 32f64.sqrt() && s < 32f64.sqrt() * 10f64.powf(8.0 / 60.0));
    }

    #[test]
    fn eps_is_sane() {
        let c = ctx(Arc::new(FnPotential::zero(1)), 32);
        let e = eps_k(c.dec(), 5, 64, 1).unwrap();
        assert!(e > 0.0 && e < 2.0 * PI);
    }
}
