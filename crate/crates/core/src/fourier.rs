//! Trigonometric interpolation on uniform periodic grids.
//!
//! Every grid function sampled at `t_j = jT/M` (M even) is identified with its
//! band-limited interpolant
//!
//! ```text
//! u(t) = (1/M) [ X_0 + 2 Σ_{k=1}^{M/2-1} Re(X_k e^{ikωt}) + X_{M/2} cos(Mωt/2) ],   ω = 2π/T
//! ```
//!
//! where `X_k` is the DFT of the samples. The Nyquist mode is carried as a
//! cosine, which is the convention used by [`second_derivative_matrix`].

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::{GridFunction, TimeGrid};

/// Fourier spectral matrix of `d²/dt²` on `m` uniform nodes of a period-`period`
/// circle. The matrix is symmetric and negative semidefinite.
pub fn second_derivative_matrix(m: usize, period: f64) -> DMatrix<f64> {
    let h = 2.0 * PI / m as f64;
    let scale = (2.0 * PI / period).powi(2);
    let diag = -PI * PI / (3.0 * h * h) - 1.0 / 6.0;
    DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            scale * diag
        } else {
            let d = i as i64 - j as i64;
            let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let s = (d as f64 * h / 2.0).sin();
            -scale * sign / (2.0 * s * s)
        }
    })
}

/// DFT coefficients of a grid function, one spectrum per component.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    grid: TimeGrid,
    coeffs: Vec<Vec<Complex64>>,
}

impl TrigInterpolant {
    pub fn new(u: &GridFunction) -> Self {
        let grid = *u.grid();
        let m = grid.nodes();
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(m);
        let coeffs = (0..grid.dim())
            .map(|a| {
                let mut buf: Vec<Complex64> =
                    (0..m).map(|j| Complex64::new(u.node(j)[a], 0.0)).collect();
                fft.process(&mut buf);
                buf
            })
            .collect();
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn omega(&self) -> f64 {
        2.0 * PI / self.grid.period()
    }

    /// Evaluates the `order`-th time derivative of the interpolant at `t`.
    pub fn eval_derivative(&self, t: f64, order: u32, out: &mut [f64]) {
        let m = self.grid.nodes();
        let half = m / 2;
        let w = self.omega();
        for (a, x) in self.coeffs.iter().enumerate() {
            let mut acc = if order == 0 { x[0].re } else { 0.0 };
            for (k, xk) in x.iter().enumerate().take(half).skip(1) {
                let kw = k as f64 * w;
                let factor = Complex64::new(0.0, kw).powu(order);
                let phase = Complex64::from_polar(1.0, kw * t);
                acc += 2.0 * (xk * factor * phase).re;
            }
            let kw = half as f64 * w;
            // d^n/dt^n cos(kw t) = kw^n cos(kw t + nπ/2)
            acc += x[half].re * kw.powi(order as i32) * (kw * t + order as f64 * PI / 2.0).cos();
            out[a] = acc / m as f64;
        }
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        self.eval_derivative(t, 0, out);
    }

    fn inverse(&self, grid: TimeGrid, spectra: Vec<Vec<Complex64>>) -> GridFunction {
        let m = grid.nodes();
        let n = grid.dim();
        let mut planner = FftPlanner::<f64>::new();
        let ifft = planner.plan_fft_inverse(m);
        let mut values = vec![0.0; m * n];
        for (a, mut buf) in spectra.into_iter().enumerate() {
            ifft.process(&mut buf);
            for j in 0..m {
                values[j * n + a] = buf[j].re / m as f64;
            }
        }
        GridFunction::from_vec(grid, values).expect("finite spectrum yields finite samples")
    }

    /// Samples of `t ↦ u(t + s)` on the same grid.
    pub fn shifted(&self, s: f64) -> GridFunction {
        let m = self.grid.nodes();
        let half = m / 2;
        let w = self.omega();
        let spectra = self
            .coeffs
            .iter()
            .map(|x| {
                let mut y = x.clone();
                for k in 1..half {
                    let ph = Complex64::from_polar(1.0, k as f64 * w * s);
                    y[k] = x[k] * ph;
                    y[m - k] = y[k].conj();
                }
                y[half] = Complex64::new(x[half].re * (half as f64 * w * s).cos(), 0.0);
                y
            })
            .collect();
        self.inverse(self.grid, spectra)
    }

    /// Samples of the interpolant on a finer grid with `m_new >= M` nodes.
    pub fn resample(&self, m_new: usize) -> Result<GridFunction> {
        let m = self.grid.nodes();
        if m_new < m {
            return Err(Error::InvalidArgument(format!(
                "cannot resample from {m} to fewer nodes ({m_new})"
            )));
        }
        let grid = TimeGrid::new(self.grid.period(), m_new, self.grid.dim())?;
        let half = m / 2;
        let ratio = m_new as f64 / m as f64;
        let spectra = self
            .coeffs
            .iter()
            .map(|x| {
                let mut y = vec![Complex64::new(0.0, 0.0); m_new];
                y[0] = x[0] * ratio;
                for k in 1..half {
                    y[k] = x[k] * ratio;
                    y[m_new - k] = y[k].conj();
                }
                if m_new == m {
                    y[half] = x[half] * ratio;
                } else {
                    y[half] = x[half] * (ratio / 2.0);
                    y[m_new - half] = y[half];
                }
                y
            })
            .collect();
        Ok(self.inverse(grid, spectra))
    }

    /// Second derivative sampled on the grid.
    pub fn second_derivative(&self) -> GridFunction {
        let m = self.grid.nodes();
        let half = m / 2;
        let w = self.omega();
        let spectra = self
            .coeffs
            .iter()
            .map(|x| {
                let mut y = vec![Complex64::new(0.0, 0.0); m];
                for k in 1..half {
                    y[k] = x[k] * (-(k as f64 * w).powi(2));
                    y[m - k] = y[k].conj();
                }
                y[half] = x[half] * (-(half as f64 * w).powi(2));
                y
            })
            .collect();
        self.inverse(self.grid, spectra)
    }

    /// Energy `Σ_a |X_k|²` per harmonic `k = 0..=M/2`.
    pub fn harmonic_energy(&self) -> Vec<f64> {
        let half = self.grid.nodes() / 2;
        (0..=half)
            .map(|k| self.coeffs.iter().map(|x| x[k].norm_sqr()).sum())
            .collect()
    }

    /// Greatest common divisor of the harmonics carrying non-negligible energy,
    /// or `None` for a (numerically) constant function. The minimal period
    /// of the interpolant is `T / divisor`.
    pub fn period_divisor(&self, rel_tol: f64) -> Option<usize> {
        let energy = self.harmonic_energy();
        let peak = energy.iter().skip(1).cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            return None;
        }
        let cut = rel_tol * rel_tol * peak;
        energy
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &e)| e > cut)
            .map(|(k, _)| k)
            .reduce(gcd)
    }

    /// Nonconstant harmonic with the most energy.
    pub fn dominant_harmonic(&self) -> Option<usize> {
        let energy = self.harmonic_energy();
        energy
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &e)| e > 0.0)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
    }

    /// `max_t |u(t)|` over the continuous interpolant, and a maximizer.
    pub fn amplitude(&self) -> (f64, f64) {
        let n = self.grid.dim();
        let m = self.grid.nodes();
        let fine_m = 16 * m;
        let fine = self.resample(fine_m).expect("upsampling is always valid");
        let dt = self.grid.period() / fine_m as f64;
        let (j_best, _) = (0..fine_m)
            .map(|j| (j, norm(fine.node(j))))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let mut buf = vec![0.0; n];
        let mut f = |t: f64| {
            self.eval(t, &mut buf);
            -norm(&buf)
        };
        let t0 = j_best as f64 * dt;
        let (t_best, v) = golden_section(&mut f, t0 - dt, t0 + dt, 1e-13 * self.grid.period());
        (-v, t_best.rem_euclid(self.grid.period()))
    }

    /// Circular cross-correlation `s ↦ (u(·+s), v)₂` evaluated from spectra.
    fn correlation(&self, other: &TrigInterpolant, s: f64) -> f64 {
        self.correlation_d(other, s, false)
    }

    /// The correlation, or its derivative in `s` when `derivative` is set.
    fn correlation_d(&self, other: &TrigInterpolant, s: f64, derivative: bool) -> f64 {
        let m = self.grid.nodes();
        let half = m / 2;
        let w = self.omega();
        let mut acc = 0.0;
        for (x, y) in self.coeffs.iter().zip(&other.coeffs) {
            if !derivative {
                acc += x[0].re * y[0].re;
            }
            for k in 1..half {
                let kw = k as f64 * w;
                let z = x[k] * y[k].conj() * Complex64::from_polar(1.0, kw * s);
                acc += 2.0 * if derivative { -kw * z.im } else { z.re };
            }
            let hw = half as f64 * w;
            let nyq = x[half].re * y[half].re;
            acc += if derivative { -hw * nyq * (hw * s).sin() } else { nyq * (hw * s).cos() };
        }
        acc * self.grid.spacing() / m as f64
    }

    /// Time shift `s` and sign `σ ∈ {±1}` maximizing `σ (u(·+s), v)₂`.
    /// With `allow_sign = false` only `σ = +1` is considered.
    pub fn best_shift(&self, other: &TrigInterpolant, allow_sign: bool) -> (f64, f64) {
        let m = self.grid.nodes();
        let period = self.grid.period();
        let samples = 8 * m;
        let ds = period / samples as f64;
        let mut best = (0.0, 1.0, f64::NEG_INFINITY);
        for i in 0..samples {
            let s = i as f64 * ds;
            let c = self.correlation(other, s);
            for sigma in [1.0, -1.0] {
                if sigma < 0.0 && !allow_sign {
                    continue;
                }
                if sigma * c > best.2 {
                    best = (s, sigma, sigma * c);
                }
            }
        }
        let sigma = best.1;
        // the maximum is a sign change of the derivative; bisecting on it
        // resolves the shift to rounding level, unlike a search on the
        // flat-topped correlation itself
        let dc = |s: f64| sigma * self.correlation_d(other, s, true);
        let (mut a, mut b) = (best.0 - ds, best.0 + ds);
        let s = if dc(a) > 0.0 && dc(b) < 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if dc(mid) > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            0.5 * (a + b)
        } else {
            let mut f = |s: f64| -sigma * self.correlation(other, s);
            golden_section(&mut f, best.0 - ds, best.0 + ds, 1e-14 * period).0
        };
        (s.rem_euclid(period), sigma)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Golden-section minimization on `[a, b]`; returns `(argmin, min)`.
pub(crate) fn golden_section(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
