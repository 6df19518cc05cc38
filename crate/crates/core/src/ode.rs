//! Adaptive Dormand–Prince 5(4) integration for small first-order systems.

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Dormand–Prince integrator with relative/absolute tolerance `tol`.
pub struct Dopri5<F> {
    rhs: F,
    pub tol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl<F: Fn(f64, &[f64], &mut [f64])> Dopri5<F> {
    pub fn new(rhs: F, tol: f64) -> Self {
        Self { rhs, tol, h_min: 1e-14, max_steps: 10_000_000 }
    }

    /// One step of size `h`; returns the 5th-order solution and the error norm.
    pub fn step(&self, t: f64, y: &[f64], h: f64) -> (Vec<f64>, f64) {
        let n = y.len();
        let mut k = vec![vec![0.0; n]; 7];
        let mut tmp = vec![0.0; n];
        for s in 0..7 {
            for i in 0..n {
                tmp[i] = y[i] + h * (0..s).map(|r| A[s][r] * k[r][i]).sum::<f64>();
            }
            (self.rhs)(t + C[s] * h, &tmp, &mut k[s]);
        }
        let mut y5 = vec![0.0; n];
        let mut err = 0.0f64;
        for i in 0..n {
            let d5: f64 = (0..7).map(|s| B5[s] * k[s][i]).sum();
            let d4: f64 = (0..7).map(|s| B4[s] * k[s][i]).sum();
            y5[i] = y[i] + h * d5;
            let scale = self.tol * (1.0 + y[i].abs().max(y5[i].abs()));
            err = err.max((h * (d5 - d4)).abs() / scale);
        }
        (y5, err)
    }

    /// Integrates from `(t0, y0)` and calls `stop(t_prev, y_prev, t, y)` after
    /// every accepted step; integration ends when it returns `true` or when
    /// `t_end` is reached. Returns the final state.
    pub fn integrate(
        &self,
        t0: f64,
        y0: &[f64],
        t_end: f64,
        h0: f64,
        mut stop: impl FnMut(f64, &[f64], f64, &[f64]) -> bool,
    ) -> Option<(f64, Vec<f64>)> {
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut h = h0.min(t_end - t0);
        for _ in 0..self.max_steps {
            if t >= t_end {
                return Some((t, y));
            }
            let h_try = h.min(t_end - t);
            let (y_new, err) = self.step(t, &y, h_try);
            if err <= 1.0 || h_try <= self.h_min {
                let t_new = if h_try == t_end - t { t_end } else { t + h_try };
                let done = stop(t, &y, t_new, &y_new);
                t = t_new;
                y = y_new;
                if done {
                    return Some((t, y));
                }
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h_try * factor).max(self.h_min);
        }
        None
    }
}
