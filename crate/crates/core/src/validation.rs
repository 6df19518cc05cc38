//! Independent checks of solver output: strong and weak residuals, a
//! shooting oracle for autonomous even scalar problems, and phase-aligned
//! comparison against oracle orbits.

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fourier::{golden_section, TrigInterpolant};
use crate::functional::FunctionalContext;
use crate::ode::Dopri5;
use crate::potential::Potential;
use crate::spectral::{GridFunction, Part, TimeGrid};

/// Residual of `ü + U(t)u + ∇W(t,u)` on the grid.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ResidualReport {
    pub sup: f64,
    pub l2: f64,
    pub periodicity_defect: f64,
    pub worst_node: usize,
}

/// Strong residual with `ü` from spectral differentiation.
pub fn strong_residual(ctx: &FunctionalContext, u: &GridFunction) -> Result<ResidualReport> {
    u.ensure_same_grid(ctx.grid())?;
    let grid = *ctx.grid();
    let n = grid.dim();
    let interp = TrigInterpolant::new(u);
    let udd = interp.second_derivative();
    let g = ctx.nonlinear_gradient(u)?;
    let mut r = vec![0.0; grid.len()];
    let mut sup = 0.0f64;
    let mut worst = 0;
    for j in 0..grid.nodes() {
        let uj = u.node(j);
        let uu = ctx.path().sample(j);
        let mut node_sq = 0.0;
        for a in 0..n {
            let mut v = udd.node(j)[a] + g.node(j)[a];
            for b in 0..n {
                v += uu[(a, b)] * uj[b];
            }
            r[j * n + a] = v;
            node_sq += v * v;
        }
        if node_sq.sqrt() > sup {
            sup = node_sq.sqrt();
            worst = j;
        }
    }
    let l2 = (grid.spacing() * r.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let mut a0 = vec![0.0; n];
    let mut a1 = vec![0.0; n];
    let mut defect = 0.0f64;
    for order in [0, 1] {
        interp.eval_derivative(0.0, order, &mut a0);
        interp.eval_derivative(grid.period(), order, &mut a1);
        for (x, y) in a0.iter().zip(&a1) {
            defect = defect.max((x - y).abs());
        }
    }
    Ok(ResidualReport { sup, l2, periodicity_defect: defect, worst_node: worst })
}

/// `max_{i ≤ k} |Φ'_λ(u) e_i|`, evaluated through the assembled operator
/// matrix rather than eigen-coordinates.
pub fn weak_residual_lambda(ctx: &FunctionalContext, u: &GridFunction, k: usize, lambda: f64) -> Result<f64> {
    u.ensure_same_grid(ctx.grid())?;
    let dec = ctx.dec();
    if k == 0 || k > dec.len() {
        return Err(Error::InvalidArgument(format!("level k = {k} outside 1..={}", dec.len())));
    }
    let grid = ctx.grid();
    let h = grid.spacing();
    let au = dec.operator() * u.values();
    let n = grid.dim();
    let mut g = vec![0.0; n];
    let mut grads = vec![0.0; grid.len()];
    for j in 0..grid.nodes() {
        ctx.potential().gradient(grid.time(j), u.node(j), &mut g);
        grads[j * n..(j + 1) * n].copy_from_slice(&g);
    }
    let mut worst = 0.0f64;
    for i in 0..k {
        let e = dec.basis().column(i);
        let lin: f64 = h * e.dot(&au);
        let nonlin: f64 = h * e.iter().zip(&grads).map(|(a, b)| a * b).sum::<f64>();
        let s = if dec.part(i) == Part::Minus { lambda } else { 1.0 };
        worst = worst.max((s * lin - lambda * nonlin).abs());
    }
    Ok(worst)
}

/// `max_{i ≤ k} |Φ'(u) e_i|`.
pub fn weak_residual(ctx: &FunctionalContext, u: &GridFunction, k: usize) -> Result<f64> {
    weak_residual_lambda(ctx, u, k, 1.0)
}

/// A periodic orbit of `ü + ω²u + W'(u) = 0` through `(A, 0)`.
#[derive(Debug, Clone, Serialize)]
pub struct OracleOrbit {
    pub amplitude: f64,
    pub min_period: f64,
    pub harmonic: usize,
    #[serde(skip)]
    pub trajectory: GridFunction,
    pub tolerance: f64,
    pub energy_drift: f64,
}

/// Shooting oracle for autonomous, even, scalar problems.
#[derive(Debug, Clone)]
pub struct ShootingOracle<'a> {
    potential: &'a dyn Potential,
    omega_sq: f64,
    pub tol: f64,
    pub amplitude_range: (f64, f64),
}

impl<'a> ShootingOracle<'a> {
    pub fn new(potential: &'a dyn Potential, omega_sq: f64) -> Result<Self> {
        if potential.dim() != 1 {
            return Err(Error::Oracle("shooting oracle needs a scalar problem".into()));
        }
        if !potential.is_autonomous() || !potential.is_even() {
            return Err(Error::Oracle("shooting oracle needs an autonomous even potential".into()));
        }
        Ok(Self { potential, omega_sq, tol: 1e-13, amplitude_range: (1e-4, 1e4) })
    }

    fn force(&self, u: f64) -> f64 {
        let mut g = [0.0];
        self.potential.gradient(0.0, &[u], &mut g);
        -self.omega_sq * u - g[0]
    }

    fn energy(&self, u: f64, v: f64) -> f64 {
        0.5 * v * v + 0.5 * self.omega_sq * u * u + self.potential.value(0.0, &[u])
    }

    fn integrator(&self) -> Dopri5<impl Fn(f64, &[f64], &mut [f64]) + '_> {
        Dopri5::new(
            move |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = self.force(y[0]);
            },
            self.tol,
        )
    }

    /// Period of the orbit through `(amplitude, 0)`: twice the time until the
    /// velocity returns to zero.
    pub fn period(&self, amplitude: f64) -> Result<f64> {
        if !(amplitude > 0.0) || self.force(amplitude) >= 0.0 {
            return Err(Error::Oracle(format!("no restoring force at amplitude {amplitude}")));
        }
        let ode = self.integrator();
        // crude time scale from the linearization at the turning point
        let stiffness = (-self.force(amplitude) / amplitude).max(1e-300);
        let scale = 1.0 / stiffness.sqrt();
        let mut bracket = None;
        ode.integrate(0.0, &[amplitude, 0.0], 1e6 * scale, 1e-3 * scale, |t0, y0, t1, y1| {
            if t0 > 0.0 && y0[1] < 0.0 && y1[1] >= 0.0 {
                bracket = Some((t0, y0.to_vec(), t1 - t0));
                true
            } else {
                false
            }
        })
        .ok_or_else(|| Error::Oracle("integrator step budget exhausted".into()))?;
        let (t0, y0, dt) = bracket.ok_or_else(|| Error::Oracle("orbit does not return".into()))?;
        // locate v = 0 inside the last step
        let (mut lo, mut hi) = (0.0, dt);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-16 * (t0 + dt) {
                break;
            }
            let (y, _) = ode.step(t0, &y0, mid);
            if y[1] < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(2.0 * (t0 + 0.5 * (lo + hi)))
    }

    /// Amplitude whose orbit has minimal period `period / harmonic`, by
    /// bisection on the period mismatch, and the trajectory sampled on `grid`.
    pub fn orbit(&self, grid: &TimeGrid, harmonic: usize) -> Result<OracleOrbit> {
        if grid.dim() != 1 || harmonic == 0 {
            return Err(Error::Oracle("need a scalar grid and harmonic >= 1".into()));
        }
        let target = grid.period() / harmonic as f64;
        let (lo, hi) = self.amplitude_range;
        let ladder: Vec<f64> = (0..=48).map(|i| lo * (hi / lo).powf(i as f64 / 48.0)).collect();
        let mut periods = Vec::with_capacity(ladder.len());
        for &a in &ladder {
            periods.push(self.period(a).ok());
        }
        let finite: Vec<f64> = periods.iter().flatten().cloned().collect();
        if finite.len() >= 2 {
            let pmax = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let pmin = finite.iter().cloned().fold(f64::INFINITY, f64::min);
            if pmax - pmin <= 1e-9 * pmax {
                return Err(Error::Oracle(format!(
                    "isochronous problem: every amplitude has period {pmax:.12}"
                )));
            }
        }
        let mut bracket = None;
        for i in 0..ladder.len() - 1 {
            if let (Some(p0), Some(p1)) = (periods[i], periods[i + 1]) {
                if (p0 - target) * (p1 - target) <= 0.0 {
                    bracket = Some((ladder[i], ladder[i + 1], p0 - target));
                    break;
                }
            }
        }
        let (mut a, mut b, fa) = bracket.ok_or_else(|| {
            Error::Oracle(format!(
                "no sign change of period - {target:.6} over amplitudes [{lo:e}, {hi:e}]: {:?}",
                periods
            ))
        })?;
        for _ in 0..200 {
            if b - a <= 1e-15 * b {
                break;
            }
            let mid = 0.5 * (a + b);
            let fm = self.period(mid)? - target;
            if fm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if (fm > 0.0) == (fa > 0.0) {
                a = mid;
            } else {
                b = mid;
            }
        }
        let amplitude = 0.5 * (a + b);
        let (trajectory, drift) = self.sample(amplitude, grid)?;
        Ok(OracleOrbit {
            amplitude,
            min_period: target,
            harmonic,
            trajectory,
            tolerance: self.tol,
            energy_drift: drift,
        })
    }

    /// Trajectory through `(amplitude, 0)` at the grid nodes, and the maximal
    /// relative energy drift along it.
    pub fn sample(&self, amplitude: f64, grid: &TimeGrid) -> Result<(GridFunction, f64)> {
        let ode = self.integrator();
        let e0 = self.energy(amplitude, 0.0);
        let mut y = vec![amplitude, 0.0];
        let mut values = vec![amplitude];
        let mut drift = 0.0f64;
        let dt = grid.spacing();
        let mut h = 1e-3 * dt;
        for j in 1..=grid.nodes() {
            let t0 = (j - 1) as f64 * dt;
            let t1 = j as f64 * dt;
            let mut h_last = h;
            let (_, y1) = ode
                .integrate(t0, &y, t1, h, |a, _, b, _| {
                    h_last = b - a;
                    false
                })
                .ok_or_else(|| Error::Oracle("integrator step budget exhausted".into()))?;
            h = h_last.max(1e-6 * dt);
            y = y1;
            drift = drift.max((self.energy(y[0], y[1]) - e0).abs() / e0.abs().max(f64::MIN_POSITIVE));
            if j < grid.nodes() {
                values.push(y[0]);
            }
        }
        Ok((GridFunction::from_vec(*grid, values)?, drift))
    }
}

/// Complete elliptic integral of the first kind via the arithmetic-geometric mean.
pub fn elliptic_k(modulus: f64) -> f64 {
    let mut a = 1.0;
    let mut b = (1.0 - modulus * modulus).sqrt();
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    PI / (2.0 * a)
}

/// Amplitude of the `ü + c·u³ = 0` orbit with minimal period `period/j`:
/// `A_j = 4K(1/√2)·j / (period·√c)`.
pub fn cubic_amplitude(c: f64, period: f64, harmonic: usize) -> f64 {
    4.0 * elliptic_k(0.5f64.sqrt()) * harmonic as f64 / (period * c.sqrt())
}

/// Minimum over time shifts and sign of `max_j |u(t_j + s) - σ v(t_j)|`.
/// The coarser of the two grids is resampled onto the finer one.
pub fn aligned_sup_distance(u: &GridFunction, v: &GridFunction, allow_sign: bool) -> Result<f64> {
    let (gu, gv) = (u.grid(), v.grid());
    if gu.period() != gv.period() || gu.dim() != gv.dim() {
        return Err(Error::GridMismatch("cannot align functions on different loops".into()));
    }
    let (u, v) = if gu.nodes() < gv.nodes() {
        (TrigInterpolant::new(u).resample(gv.nodes())?, v.clone())
    } else if gv.nodes() < gu.nodes() {
        (u.clone(), TrigInterpolant::new(v).resample(gu.nodes())?)
    } else {
        (u.clone(), v.clone())
    };
    let iu = TrigInterpolant::new(&u);
    let iv = TrigInterpolant::new(&v);
    let (s0, sigma) = iu.best_shift(&iv, allow_sign);
    let sup = |s: f64| {
        let sh = iu.shifted(s);
        sh.values()
            .iter()
            .zip(v.values().iter())
            .map(|(a, b)| (a - sigma * b).abs())
            .fold(0.0, f64::max)
    };
    let ds = u.grid().period() / (8 * u.grid().nodes()) as f64;
    let mut f = sup;
    let (_, best) = golden_section(&mut f, s0 - ds, s0 + ds, 1e-14 * u.grid().period());
    Ok(best.min(sup(s0)))
}

/// Sup-norm distance between a solution and an oracle orbit, modulo time
/// shift and sign.
pub fn compare_to_oracle(u: &GridFunction, orbit: &OracleOrbit) -> Result<f64> {
    aligned_sup_distance(u, &orbit.trajectory, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{FnPotential, PowerPotential};
    use crate::spectral::MatrixPath;
    use std::sync::Arc;

    #[test]
    fn agm_reproduces_known_k() {
        assert!((elliptic_k(0.5f64.sqrt()) - 1.854_074_677_301_372).abs() < 1e-14);
        assert!((elliptic_k(0.0) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn shooting_agrees_with_agm_for_cubic() {
        let w = PowerPotential::quartic(1);
        let oracle = ShootingOracle::new(&w, 0.0).unwrap();
        let grid = TimeGrid::new(2.0 * PI, 64, 1).unwrap();
        let o1 = oracle.orbit(&grid, 1).unwrap();
        let exact = cubic_amplitude(1.0, 2.0 * PI, 1);
        assert!((exact - 1.18034).abs() < 1e-5);
        assert!((o1.amplitude - exact).abs() < 1e-8, "{} vs {}", o1.amplitude, exact);
        assert!(o1.energy_drift < 1e-10, "drift {}", o1.energy_drift);
        let o2 = oracle.orbit(&grid, 2).unwrap();
        assert!((o2.amplitude - 2.0 * o1.amplitude).abs() < 1e-8);
    }

    #[test]
    fn isochronous_problem_is_rejected() {
        let w = FnPotential::zero(1);
        let oracle = ShootingOracle::new(&w, 1.0).unwrap();
        let grid = TimeGrid::new(2.0 * PI, 32, 1).unwrap();
        match oracle.orbit(&grid, 1) {
            Err(Error::Oracle(msg)) => assert!(msg.contains("isochronous")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn oracle_requires_even_autonomous_scalar() {
        let w = PowerPotential::modulated(1.0, 4.0, 0.5, 1.0, 1).unwrap();
        assert!(ShootingOracle::new(&w, 0.0).is_err());
        let w2 = PowerPotential::quartic(2);
        assert!(ShootingOracle::new(&w2, 0.0).is_err());
    }

    #[test]
    fn residual_of_exact_harmonic_solution() {
        let grid = TimeGrid::new(2.0 * PI, 32, 1).unwrap();
        let ctx = FunctionalContext::build(grid, MatrixPath::constant(&grid, 1.0), Arc::new(FnPotential::zero(1))).unwrap();
        let u = GridFunction::from_fn(grid, |t, o| o[0] = t.cos());
        let r = strong_residual(&ctx, &u).unwrap();
        assert!(r.sup <= 1e-12 && r.l2 <= 1e-12);
        assert!(r.periodicity_defect < 1e-12);
        let zero = GridFunction::zeros(grid);
        assert_eq!(strong_residual(&ctx, &zero).unwrap().sup, 0.0);
        assert_eq!(weak_residual(&ctx, &zero, 10).unwrap(), 0.0);
    }

    #[test]
    fn weak_residual_matches_coefficient_route() {
        let grid = TimeGrid::new(2.0 * PI, 16, 1).unwrap();
        let ctx = FunctionalContext::build(grid, MatrixPath::constant(&grid, 1.5), Arc::new(PowerPotential::quartic(1))).unwrap();
        let u = GridFunction::from_fn(grid, |t, o| o[0] = 0.4 + t.sin() + 0.3 * (2.0 * t).cos());
        for lambda in [1.0, 1.7] {
            let weak = weak_residual_lambda(&ctx, &u, 16, lambda).unwrap();
            let mut expected = 0.0f64;
            for i in 0..16 {
                let e = ctx.dec().eigenvector(i);
                expected = expected.max(ctx.phi_prime_apply(&u, &e, lambda).unwrap().abs());
            }
            assert!(weak > 0.0);
            assert!((weak - expected).abs() < 1e-9 * (1.0 + expected));
        }
    }

    #[test]
    fn alignment_is_shift_and_sign_invariant() {
        let w = PowerPotential::quartic(1);
        let oracle = ShootingOracle::new(&w, 0.0).unwrap();
        let grid = TimeGrid::new(2.0 * PI, 64, 1).unwrap();
        let orbit = oracle.orbit(&grid, 1).unwrap();
        let shifted = TrigInterpolant::new(&orbit.trajectory).shifted(PI / 2.0).scaled(-1.0);
        assert!(compare_to_oracle(&shifted, &orbit).unwrap() < 1e-10);
        let d1 = aligned_sup_distance(&orbit.trajectory, &shifted, true).unwrap();
        let d2 = aligned_sup_distance(&shifted, &orbit.trajectory, true).unwrap();
        assert!((d1 - d2).abs() < 1e-10);
        let other = oracle.orbit(&grid, 2).unwrap();
        assert!(compare_to_oracle(&other.trajectory, &orbit).unwrap() > 0.5);
    }
}
