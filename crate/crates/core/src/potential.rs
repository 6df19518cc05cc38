//! Nonlinear potentials `W(t, u)` and their declared hypothesis constants.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// The nonlinear part `W` of `V(t,u) = ½⟨U(t)u,u⟩ + W(t,u)`.
pub trait Potential: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, t: f64, u: &[f64]) -> f64;

    fn gradient(&self, t: f64, u: &[f64], out: &mut [f64]);

    /// Writes the row-major `N×N` Hessian into `out` and returns `true`, or
    /// returns `false` if no analytic Hessian is available.
    fn hessian(&self, _t: f64, _u: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// Declared evenness `W(t,-u) = W(t,u)`.
    fn is_even(&self) -> bool {
        false
    }

    /// Declared independence of `t`.
    fn is_autonomous(&self) -> bool {
        false
    }

    fn name(&self) -> String;
}

/// Hessian of `W` at `(t, u)`, by central differences of the gradient when no
/// analytic Hessian exists. The step is `h = 1e-6·(1 + scale)`.
pub fn hessian_or_fd(pot: &dyn Potential, t: f64, u: &[f64], scale: f64, out: &mut [f64]) {
    if pot.hessian(t, u, out) {
        return;
    }
    let n = u.len();
    let h = 1e-6 * (1.0 + scale);
    let mut up = u.to_vec();
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    for b in 0..n {
        up[b] = u[b] + h;
        pot.gradient(t, &up, &mut gp);
        up[b] = u[b] - h;
        pot.gradient(t, &up, &mut gm);
        up[b] = u[b];
        for a in 0..n {
            out[a * n + b] = (gp[a] - gm[a]) / (2.0 * h);
        }
    }
    for a in 0..n {
        for b in 0..a {
            let s = 0.5 * (out[a * n + b] + out[b * n + a]);
            out[a * n + b] = s;
            out[b * n + a] = s;
        }
    }
}

fn euclid(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `W(t,u) = c·a(t)·|u|^p` with `a(t) = 1 + m·cos(2πt/T)`; `m = 0` gives the
/// autonomous homogeneous potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPotential {
    coeff: f64,
    exponent: f64,
    modulation: f64,
    period: f64,
    dim: usize,
}

impl PowerPotential {
    pub fn new(coeff: f64, exponent: f64, dim: usize) -> Result<Self> {
        Self::modulated(coeff, exponent, 0.0, 1.0, dim)
    }

    /// Time-modulated variant; the built-in library uses `m = ½`.
    pub fn modulated(coeff: f64, exponent: f64, modulation: f64, period: f64, dim: usize) -> Result<Self> {
        if !(exponent > 1.0) {
            return Err(Error::ParameterDomain(format!(
                "power potential needs exponent > 1, got {exponent}"
            )));
        }
        if !(coeff.is_finite() && modulation.abs() < 1.0 && period > 0.0 && dim > 0) {
            return Err(Error::ParameterDomain("invalid power potential parameters".into()));
        }
        Ok(Self { coeff, exponent, modulation, period, dim })
    }

    /// `¼|u|⁴`, the Duffing nonlinearity.
    pub fn quartic(dim: usize) -> Self {
        Self::new(0.25, 4.0, dim).expect("valid constants")
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    fn weight(&self, t: f64) -> f64 {
        self.coeff * (1.0 + self.modulation * (2.0 * PI * t / self.period).cos())
    }
}

impl Potential for PowerPotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, t: f64, u: &[f64]) -> f64 {
        self.weight(t) * euclid(u).powf(self.exponent)
    }

    fn gradient(&self, t: f64, u: &[f64], out: &mut [f64]) {
        let r = euclid(u);
        let s = if r > 0.0 {
            self.weight(t) * self.exponent * r.powf(self.exponent - 2.0)
        } else {
            0.0
        };
        for (o, v) in out.iter_mut().zip(u) {
            *o = s * v;
        }
    }

    fn hessian(&self, t: f64, u: &[f64], out: &mut [f64]) -> bool {
        let n = u.len();
        let p = self.exponent;
        let c = self.weight(t) * p;
        let r = euclid(u);
        out.iter_mut().for_each(|o| *o = 0.0);
        if r == 0.0 && p > 2.0 {
            return true;
        }
        // For p < 2 the Hessian blows up at the origin; clamp the radius.
        let r = r.max(1e-150);
        let diag = c * r.powf(p - 2.0);
        let outer = c * (p - 2.0) * r.powf(p - 4.0);
        for a in 0..n {
            for b in 0..n {
                out[a * n + b] = outer * u[a] * u[b] + if a == b { diag } else { 0.0 };
            }
        }
        true
    }

    fn is_even(&self) -> bool {
        true
    }

    fn is_autonomous(&self) -> bool {
        self.modulation == 0.0
    }

    fn name(&self) -> String {
        if self.modulation == 0.0 {
            format!("{}*|u|^{}", self.coeff, self.exponent)
        } else {
            format!("{}*(1+{}cos(2pi t/T))*|u|^{}", self.coeff, self.modulation, self.exponent)
        }
    }
}

type ValueFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Potential assembled from closures; the gradient is mandatory.
#[derive(Clone)]
pub struct FnPotential {
    name: String,
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Arc<GradFn>,
    even: bool,
    autonomous: bool,
}

impl FnPotential {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            even: false,
            autonomous: false,
        }
    }

    pub fn even(mut self, even: bool) -> Self {
        self.even = even;
        self
    }

    pub fn autonomous(mut self, autonomous: bool) -> Self {
        self.autonomous = autonomous;
        self
    }

    /// `W ≡ 0`.
    pub fn zero(dim: usize) -> Self {
        Self::new("0", dim, |_, _| 0.0, |_, _, g| g.iter_mut().for_each(|x| *x = 0.0))
            .even(true)
            .autonomous(true)
    }
}

impl fmt::Debug for FnPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPotential").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

impl Potential for FnPotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, t: f64, u: &[f64]) -> f64 {
        (self.value)(t, u)
    }

    fn gradient(&self, t: f64, u: &[f64], out: &mut [f64]) {
        (self.gradient)(t, u, out)
    }

    fn is_even(&self) -> bool {
        self.even
    }

    fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Growth regime the hypothesis constants refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// (AQ₁)–(AQ₃): small solutions with negative critical values.
    Asymptotic,
    /// (SQ₁)–(SQ₃): large solutions with critical values tending to +∞.
    Superquadratic,
}

/// User-declared constants of the growth hypotheses. All optional; the
/// operations that need a constant report [`Error::MissingConstant`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Hypotheses {
    pub mu: Option<f64>,
    pub r1: Option<f64>,
    pub c2: Option<f64>,
    pub r2: Option<f64>,
    pub d: Option<f64>,
    pub a1: Option<f64>,
    pub nu: Option<f64>,
    /// The exponent ϱ of (SQ₃).
    pub rho: Option<f64>,
    pub b: Option<f64>,
}

macro_rules! require {
    ($self:ident, $field:ident) => {
        $self.$field.ok_or(Error::MissingConstant(stringify!($field)))
    };
}

impl Hypotheses {
    pub fn mu(&self) -> Result<f64> {
        require!(self, mu)
    }
    pub fn r1(&self) -> Result<f64> {
        require!(self, r1)
    }
    pub fn c2(&self) -> Result<f64> {
        require!(self, c2)
    }
    pub fn r2(&self) -> Result<f64> {
        require!(self, r2)
    }
    pub fn d(&self) -> Result<f64> {
        require!(self, d)
    }
    pub fn a1(&self) -> Result<f64> {
        require!(self, a1)
    }
    pub fn nu(&self) -> Result<f64> {
        require!(self, nu)
    }
    pub fn rho(&self) -> Result<f64> {
        require!(self, rho)
    }
    pub fn b(&self) -> Result<f64> {
        require!(self, b)
    }

    /// Checks the domains of every declared constant, collecting all problems.
    pub fn domain_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let positive = [
            ("r1", self.r1),
            ("c2", self.c2),
            ("r2", self.r2),
            ("d", self.d),
            ("a1", self.a1),
            ("b", self.b),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    errs.push(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if let Some(mu) = self.mu {
            if !(mu > 0.0 && mu < 2.0) {
                errs.push(format!("mu must lie in (0, 2), got {mu}"));
            }
        }
        if let Some(nu) = self.nu {
            if !(nu > 2.0 && nu.is_finite()) {
                errs.push(format!("nu must exceed 2 (SQ1), got {nu}"));
            }
        }
        if let Some(rho) = self.rho {
            if !(rho >= 1.0) {
                errs.push(format!("rho must satisfy rho >= 1 (SQ3), got {rho}"));
            }
            if let Some(nu) = self.nu {
                if !(rho > nu - 2.0) {
                    errs.push(format!(
                        "rho must lie in (nu - 2, inf) (SQ3), got rho = {rho}, nu - 2 = {}",
                        nu - 2.0
                    ));
                }
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.domain_errors();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::ParameterDomain(errs.join("; ")))
        }
    }

    /// Constants every operation of the given mode relies on.
    pub fn missing_for(&self, mode: Mode) -> Vec<&'static str> {
        let needed: &[(&'static str, Option<f64>)] = match mode {
            Mode::Asymptotic => &[
                ("mu", self.mu),
                ("r1", self.r1),
                ("c2", self.c2),
                ("r2", self.r2),
                ("d", self.d),
            ],
            Mode::Superquadratic => &[("a1", self.a1), ("nu", self.nu), ("rho", self.rho), ("b", self.b)],
        };
        needed.iter().filter(|(_, v)| v.is_none()).map(|(n, _)| *n).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_gradient_and_hessian_match_differences() {
        let w = PowerPotential::modulated(1.3, 2.5, 0.5, 2.0, 3).unwrap();
        let u = [0.4, -0.7, 1.1];
        let t = 0.3;
        let mut g = [0.0; 3];
        w.gradient(t, &u, &mut g);
        let h = 1e-6;
        for a in 0..3 {
            let mut up = u;
            let mut um = u;
            up[a] += h;
            um[a] -= h;
            let fd = (w.value(t, &up) - w.value(t, &um)) / (2.0 * h);
            assert!((fd - g[a]).abs() < 1e-8 * (1.0 + g[a].abs()));
        }
        let mut exact = [0.0; 9];
        assert!(w.hessian(t, &u, &mut exact));
        let fd_only = FnPotential::new("copy", 3, {
            let w = w.clone();
            move |t, u| w.value(t, u)
        }, {
            let w = w.clone();
            move |t, u, g| w.gradient(t, u, g)
        });
        let mut approx = [0.0; 9];
        hessian_or_fd(&fd_only, t, &u, 1.0, &mut approx);
        for (a, b) in exact.iter().zip(&approx) {
            assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn power_potential_is_even_and_zero_at_origin() {
        let w = PowerPotential::new(1.0, 1.5, 2).unwrap();
        assert_eq!(w.value(0.0, &[0.0, 0.0]), 0.0);
        let mut g = [1.0; 2];
        w.gradient(0.0, &[0.0, 0.0], &mut g);
        assert_eq!(g, [0.0, 0.0]);
        assert_eq!(w.value(0.1, &[0.3, -0.2]), w.value(0.1, &[-0.3, 0.2]));
        assert!(PowerPotential::new(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn hypothesis_domains() {
        let h = Hypotheses { nu: Some(1.5), ..Default::default() };
        assert!(h.validate().is_err());
        let h = Hypotheses { nu: Some(4.0), rho: Some(2.0), ..Default::default() };
        let errs = h.domain_errors();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].contains("(nu - 2, inf)"));
        let h = Hypotheses { nu: Some(4.0), rho: Some(4.0), a1: Some(1.0), b: Some(0.4), ..Default::default() };
        assert!(h.validate().is_ok());
        assert!(h.missing_for(Mode::Superquadratic).is_empty());
        assert_eq!(h.missing_for(Mode::Asymptotic).len(), 5);
        assert!(matches!(h.mu(), Err(Error::MissingConstant("mu"))));
    }
}
