//! Sampling-based falsification of the growth hypotheses (AQ₁)–(AQ₃),
//! (SQ₁)–(SQ₃), evenness, and gradient–potential consistency.
//!
//! Verdicts are never stronger than "no violation found": the conditions are
//! asymptotic and only probed on a finite ladder of spherical shells.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::potential::{Hypotheses, Mode, Potential};
use crate::spectral::TimeGrid;

/// Stored violations per report.
pub const MAX_VIOLATIONS: usize = 100;
/// Decades at the end of the ladder probed by the limit conditions.
pub const LIMIT_DECADES: f64 = 3.0;
/// Default lower bound on `W/|u|²` at the extreme shell for the divergence proxies.
pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 10.0;
/// Minimal growth of `W/|u|²` across the last decades for the divergence proxies.
pub const DIVERGENCE_GROWTH: f64 = 2.0;

#[derive(Debug, Clone, Serialize)]
pub struct SampleScheme {
    pub radii: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub seed: u64,
}

impl SampleScheme {
    /// `shells + 1` geometric radii from `r_min` to `r_max` (so that decade
    /// boundaries fall on the ladder when `shells` is a multiple of the number
    /// of decades), `count` seeded unit directions in `R^dim` (`±1` for
    /// `dim = 1`), and the given sample times.
    pub fn new(r_min: f64, r_max: f64, shells: usize, dim: usize, count: usize, times: Vec<f64>, seed: u64) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) || shells == 0 {
            return Err(Error::InvalidArgument(format!("bad radius ladder [{r_min}, {r_max}] x {shells}")));
        }
        if dim == 0 || times.is_empty() {
            return Err(Error::InvalidArgument("need dim >= 1 and at least one time".into()));
        }
        let (lo, hi) = (r_min.log10(), r_max.log10());
        let radii = (0..=shells)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / shells as f64))
            .collect();
        let directions = if dim == 1 {
            vec![vec![1.0], vec![-1.0]]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count.max(1))
                .map(|_| loop {
                    let v = DVector::<f64>::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
                    let n = v.norm();
                    if n > 1e-12 {
                        break (v / n).iter().cloned().collect();
                    }
                })
                .collect()
        };
        Ok(Self { radii, directions, times, seed })
    }

    /// Defaults: radii `1e-4..1e4` over 60 shells, 32 directions for
    /// `N ≤ 3` (scaled by `N/3` beyond), times at the grid nodes.
    pub fn for_grid(grid: &TimeGrid, seed: u64) -> Result<Self> {
        let n = grid.dim();
        let count = if n <= 3 { 32 } else { (32 * n).div_ceil(3) };
        let times = (0..grid.nodes()).map(|j| grid.time(j)).collect();
        Self::new(1e-4, 1e4, 60, n, count, times, seed)
    }

    pub fn dim(&self) -> usize {
        self.directions[0].len()
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.directions.len() * self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First shell index within the last `decades` of the ladder.
    fn limit_start(&self, decades: f64) -> usize {
        let r_max = *self.radii.last().unwrap();
        let cut = r_max * 10f64.powf(-decades) * (1.0 - 1e-12);
        self.radii.iter().position(|&r| r >= cut).unwrap_or(0)
    }

    /// Last shell index within the first `decades` of the ladder.
    fn small_end(&self, decades: f64) -> usize {
        let cut = self.radii[0] * 10f64.powf(decades) * (1.0 + 1e-12);
        self.radii.iter().rposition(|&r| r <= cut).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NoViolationFound,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Violation {
    pub check: String,
    pub t: f64,
    pub u: Vec<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub condition: String,
    pub params: BTreeMap<String, f64>,
    pub samples: usize,
    /// Minimum signed margin over the checked samples; negative iff violated.
    pub worst_margin: f64,
    pub violation_count: usize,
    /// Smallest `|u|` among all violating samples.
    pub min_violation_radius: Option<f64>,
    /// The most negative violations (at most [`MAX_VIOLATIONS`]).
    pub violations: Vec<Violation>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    /// Derived quantities such as `R3`, `L0` and proxy ratios.
    pub extras: BTreeMap<String, f64>,
}

/// `a - b`, with differences at rounding level reported as exactly 0.
fn margin(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d.abs() <= 1e-12 * a.abs().max(b.abs()) {
        0.0
    } else {
        d
    }
}

struct ShellScan {
    /// Minimum margin per shell.
    shell_min: Vec<f64>,
    negatives: Vec<(usize, Violation)>,
    count: usize,
}

fn scan(
    scheme: &SampleScheme,
    shells: std::ops::Range<usize>,
    check: &str,
    f: impl Fn(f64, &[f64], f64) -> f64 + Sync,
) -> ShellScan {
    let per_shell: Vec<(f64, Vec<(usize, Violation)>, usize)> = shells
        .clone()
        .into_par_iter()
        .map(|s| {
            let r = scheme.radii[s];
            let mut min = f64::INFINITY;
            let mut neg = Vec::new();
            let mut count = 0;
            let mut u = vec![0.0; scheme.dim()];
            for d in &scheme.directions {
                for (x, di) in u.iter_mut().zip(d) {
                    *x = r * di;
                }
                for &t in &scheme.times {
                    let m = f(t, &u, r);
                    count += 1;
                    let m = if m.is_nan() { f64::NEG_INFINITY } else { m };
                    min = min.min(m);
                    if m < 0.0 {
                        neg.push((s, Violation { check: check.to_string(), t, u: u.clone(), margin: m }));
                    }
                }
            }
            (min, neg, count)
        })
        .collect();
    let mut shell_min = vec![f64::INFINITY; scheme.radii.len()];
    let mut negatives = Vec::new();
    let mut count = 0;
    for (s, (min, neg, c)) in shells.zip(per_shell) {
        shell_min[s] = min;
        negatives.extend(neg);
        count += c;
    }
    ShellScan { shell_min, negatives, count }
}

struct Builder {
    report: AuditReport,
    all: Vec<Violation>,
}

impl Builder {
    fn new(condition: &str) -> Self {
        Self {
            report: AuditReport {
                condition: condition.to_string(),
                params: BTreeMap::new(),
                samples: 0,
                worst_margin: f64::INFINITY,
                violation_count: 0,
                min_violation_radius: None,
                violations: Vec::new(),
                verdict: Verdict::NoViolationFound,
                notes: Vec::new(),
                extras: BTreeMap::new(),
            },
            all: Vec::new(),
        }
    }

    fn param(mut self, name: &str, v: f64) -> Self {
        self.report.params.insert(name.to_string(), v);
        self
    }

    /// Pointwise check: every sample counts toward the margin.
    fn pointwise(&mut self, s: ShellScan) {
        self.report.samples += s.count;
        let m = s.shell_min.iter().cloned().fold(f64::INFINITY, f64::min);
        self.report.worst_margin = self.report.worst_margin.min(m);
        self.all.extend(s.negatives.into_iter().map(|(_, v)| v));
    }

    /// Limit check over a window of shells: the extreme shell decides, and
    /// negative margins confined to inner shells only make the verdict
    /// inconclusive.
    fn limit(&mut self, s: ShellScan, extreme: usize, label: &str) {
        self.report.samples += s.count;
        self.report.worst_margin = self.report.worst_margin.min(s.shell_min[extreme]);
        let inner = s.negatives.iter().filter(|(sh, _)| *sh != extreme).count();
        if inner > 0 && s.shell_min[extreme] >= 0.0 {
            self.report.notes.push(format!(
                "{label}: {inner} negative margins on inner shells of the limit window"
            ));
            self.inconclusive();
        }
        self.all.extend(s.negatives.into_iter().filter(|(sh, _)| *sh == extreme).map(|(_, v)| v));
    }

    fn inconclusive(&mut self) {
        if self.report.verdict == Verdict::NoViolationFound {
            self.report.verdict = Verdict::Inconclusive;
        }
    }

    fn note(&mut self, s: String) {
        self.report.notes.push(s);
    }

    fn extra(&mut self, k: &str, v: f64) {
        self.report.extras.insert(k.to_string(), v);
    }

    fn finish(mut self) -> AuditReport {
        self.all.sort_by(|a, b| a.margin.total_cmp(&b.margin));
        self.report.violation_count = self.all.len();
        self.report.min_violation_radius = self.all.iter().map(|v| norm(&v.u)).reduce(f64::min);
        if !self.all.is_empty() {
            self.report.verdict = Verdict::Violated;
        }
        self.all.truncate(MAX_VIOLATIONS);
        self.report.violations = self.all;
        if !self.report.worst_margin.is_finite() && self.report.samples == 0 {
            self.report.worst_margin = 0.0;
        }
        self.report
    }
}

fn grad(pot: &dyn Potential, t: f64, u: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; u.len()];
    pot.gradient(t, u, &mut g);
    g
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_dim(pot: &dyn Potential, scheme: &SampleScheme) -> Result<()> {
    if pot.dim() != scheme.dim() {
        return Err(Error::InvalidArgument(format!(
            "potential acts on R^{}, sample directions live in R^{}",
            pot.dim(),
            scheme.dim()
        )));
    }
    Ok(())
}

/// Minimum of `W(t,u)/|u|²` per shell.
fn quadratic_ratio(pot: &dyn Potential, scheme: &SampleScheme) -> Vec<f64> {
    let s = scan(scheme, 0..scheme.radii.len(), "ratio", |t, u, r| pot.value(t, u) / (r * r));
    s.shell_min
}

/// Divergence proxy for `W/|u|² → ∞` as the radius runs from shell `from`
/// to shell `to`: the ratio must be monotone along the way, grow by
/// [`DIVERGENCE_GROWTH`], and reach `threshold`. No growth at all is a
/// violation; anything in between is inconclusive.
fn divergence_proxy(b: &mut Builder, pot: &dyn Potential, scheme: &SampleScheme, from: usize, to: usize, threshold: f64) {
    let ratio = quadratic_ratio(pot, scheme);
    let (start, end) = (ratio[from], ratio[to]);
    let growth = if start > 0.0 { end / start } else if end > 0.0 { f64::INFINITY } else { 0.0 };
    let step: isize = if to > from { 1 } else { -1 };
    let mut monotone = true;
    let mut i = from as isize;
    while i != to as isize {
        let (a, c) = (ratio[i as usize], ratio[(i + step) as usize]);
        if c < a * (1.0 - 1e-12) {
            monotone = false;
        }
        i += step;
    }
    b.extra("proxy_ratio_start", start);
    b.extra("proxy_ratio_extreme", end);
    b.extra("proxy_growth", growth);
    b.report.samples += scheme.directions.len() * scheme.times.len() * scheme.radii.len();
    let r = scheme.radii[to];
    if growth <= 1.0 {
        // the ratio does not increase toward the limit: record the
        // extreme-shell sample that attains it
        let mut worst: Option<(f64, f64, Vec<f64>)> = None;
        for d in &scheme.directions {
            let u: Vec<f64> = d.iter().map(|x| r * x).collect();
            for &t in &scheme.times {
                let q = pot.value(t, &u);
                if worst.as_ref().is_none_or(|w| q < w.0) {
                    worst = Some((q, t, u.clone()));
                }
            }
        }
        let (_, t, u) = worst.expect("nonempty scheme");
        let w = Violation { check: "divergence proxy".into(), t, u, margin: growth - DIVERGENCE_GROWTH };
        b.report.worst_margin = b.report.worst_margin.min(w.margin);
        b.note(format!("W/|u|^2 does not grow toward the limit (growth factor {growth:.3e})"));
        b.all.push(w);
    } else if !monotone || growth < DIVERGENCE_GROWTH || end < threshold {
        b.note(format!(
            "divergence proxy undecided: growth {growth:.3e}, monotone {monotone}, extreme ratio {end:.3e} vs threshold {threshold:.3e}"
        ));
        b.inconclusive();
    }
}

/// Smallest ladder radius beyond which `pred` holds at every sample.
fn onset_radius(scheme: &SampleScheme, pred: impl Fn(f64, &[f64], f64) -> bool + Sync) -> Option<f64> {
    let s = scan(scheme, 0..scheme.radii.len(), "onset", |t, u, r| if pred(t, u, r) { 1.0 } else { -1.0 });
    let last_bad = s.shell_min.iter().rposition(|&m| m < 0.0);
    match last_bad {
        None => Some(scheme.radii[0]),
        Some(i) if i + 1 < scheme.radii.len() => Some(scheme.radii[i + 1]),
        _ => None,
    }
}

/// (AQ₁): `W ≥ 0` everywhere and `⟨∇W,u⟩ ≤ μW` for `|u| ≥ R₁`.
pub fn audit_aq1(pot: &dyn Potential, hyp: &Hypotheses, scheme: &SampleScheme) -> Result<AuditReport> {
    check_dim(pot, scheme)?;
    let (mu, r1) = (hyp.mu()?, hyp.r1()?);
    if !(mu > 0.0 && mu < 2.0) {
        return Err(Error::ParameterDomain(format!("mu = {mu} must lie in (0, 2) (AQ1)")));
    }
    let mut b = Builder::new("AQ1").param("mu", mu).param("R1", r1);
    let all = 0..scheme.radii.len();
    b.pointwise(scan(scheme, all, "W >= 0", |t, u, _| pot.value(t, u)));
    let start = scheme.radii.iter().position(|&r| r >= r1).unwrap_or(scheme.radii.len());
    b.pointwise(scan(scheme, start..scheme.radii.len(), "<gradW,u> <= mu W", |t, u, _| {
        margin(mu * pot.value(t, u), dot(&grad(pot, t, u), u))
    }));
    b.extra("c1_estimate", estimate_c1(pot, scheme, mu));
    Ok(b.finish())
}

/// Sample estimate of `c₁` in `W ≤ c₁(1 + |u|^μ)`.
pub fn estimate_c1(pot: &dyn Potential, scheme: &SampleScheme, mu: f64) -> f64 {
    let s = scan(scheme, 0..scheme.radii.len(), "c1", |t, u, r| -pot.value(t, u) / (1.0 + r.powf(mu)));
    -s.shell_min.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Sample estimate of `a₂` in `W ≤ a₁(|u| + |u|^ν) + a₂`, floored at 0.
pub fn estimate_a2(pot: &dyn Potential, scheme: &SampleScheme, a1: f64, nu: f64) -> f64 {
    let s = scan(scheme, 0..scheme.radii.len(), "a2", |t, u, r| -(pot.value(t, u) - a1 * (r + r.powf(nu))));
    (-s.shell_min.iter().cloned().fold(f64::INFINITY, f64::min)).max(0.0)
}

/// (AQ₂): `W/|u|² → ∞` as `u → 0` (decade proxy) and `W ≤ c₂|u|` for `|u| ≤ R₂`.
pub fn audit_aq2_with(pot: &dyn Potential, hyp: &Hypotheses, scheme: &SampleScheme, threshold: f64) -> Result<AuditReport> {
    check_dim(pot, scheme)?;
    let (c2, r2) = (hyp.c2()?, hyp.r2()?);
    let mut b = Builder::new("AQ2").param("c2", c2).param("R2", r2).param("threshold", threshold);
    let end = scheme.radii.iter().rposition(|&r| r <= r2 * (1.0 + 1e-12)).map_or(0, |i| i + 1);
    b.pointwise(scan(scheme, 0..end, "W <= c2|u|", |t, u, r| margin(c2 * r, pot.value(t, u))));
    let inner = scheme.small_end(LIMIT_DECADES);
    divergence_proxy(&mut b, pot, scheme, inner, 0, threshold);
    Ok(b.finish())
}

pub fn audit_aq2(pot: &dyn Potential, hyp: &Hypotheses, scheme: &SampleScheme) -> Result<AuditReport> {
    audit_aq2_with(pot, hyp, scheme, DEFAULT_DIVERGENCE_THRESHOLD)
}

/// (AQ₃): `W/|u| ≥ d` on the largest decades; also the halved form
/// `W ≥ d|u|/2` and its onset radius `R₃`.
pub fn audit_aq3(pot: &dyn Potential, hyp: &Hypotheses, scheme: &SampleScheme) -> Result<AuditReport> {
    check_dim(pot, scheme)?;
    let d = hyp.d()?;
    let mut b = Builder::new("AQ3").param("d", d);
    let start = scheme.limit_start(LIMIT_DECADES);
    let extreme = scheme.radii.len() - 1;
    b.limit(
        scan(scheme, start..scheme.radii.len(), "W/|u| >= d", |t, u, r| margin(pot.value(t, u) / r, d)),
        extreme,
        "W/|u| >= d",
    );
    match onset_radius(scheme, |t, u, r| pot.value(t, u) >= 0.5 * d * r) {
        Some(r3) => b.extra("R3", r3),
        None => b.note("W >= d|u|/2 fails at the largest shell; R3 not found".into()),
    }
    Ok(b.finish())
}

/// (SQ₁): `|∇W| ≤ a₁(1 + |u|^{ν-1})` on all samples.
pub fn audit_sq1(pot: &dyn Potential, hyp: &Hypotheses, scheme: &SampleScheme) -> Result<AuditReport> {
    check_dim(pot, scheme)?;
    let (a1, nu) = (hyp.a1()?, hyp.nu()?);
    if !(nu > 2.0) {
        return Err(Error::ParameterDomain(format!("nu = {nu}: nu must exceed 2 (SQ1)")));
    }
    let mut b = Builder::new("SQ1").param("a1", a1).param("nu", nu);
    b.pointwise(scan(scheme, 0..scheme.radii.len(), "|gradW| <= a1(1+|u|^(nu-1))", |t, u, r| {
        margin(a1 * (1.0 + r.powf(nu - 1.0)), norm(&grad(pot, t, u)))
    }));
    b.extra("a2_estimate", estimate_a2(pot, scheme, a1, nu));
    Ok(b.finish())
}

/// (SQ₂): `W ≥ 0` and `W/|u|² → ∞` as `|u| → ∞` (decade proxy).
pub fn audit_sq2_with(pot: &dyn Potential, scheme: &SampleScheme, threshold: f64) -> Result<AuditReport> {
    check_dim(pot, scheme)?;
    let mut b = Builder::new("SQ2").param("threshold", threshold);
    b.pointwise(scan(scheme, 0..scheme.radii.len(), "W >= 0", |t, u, _| pot.value(t, u)));
    let start = scheme.limit_start(LIMIT_DECADES);
    divergence_proxy(&mut b, pot, scheme, start, scheme.radii.len() - 1, threshold);
    Ok(b.finish())
}

pub fn audit_sq2(pot: &dyn Potential, scheme: &SampleScheme) -> Result<AuditReport> {
    audit_sq2_with(pot, scheme, DEFAULT_DIVERGENCE_THRESHOLD)
}

/// (SQ₃): `(⟨∇W,u⟩ - 2W)/|u|^ϱ ≥ b` on the largest decades, with the onset
/// radius `L₀` of `⟨∇W,u⟩ - 2W ≥ (b/4)|u|^ϱ`.
pub fn audit_sq3(pot: &dyn Potential, hyp: &Hypotheses, scheme: &SampleScheme) -> Result<AuditReport> {
    check_dim(pot, scheme)?;
    let (rho, bb, nu) = (hyp.rho()?, hyp.b()?, hyp.nu()?);
    if rho < 1.0 {
        return Err(Error::ParameterDomain(format!("rho = {rho} must be at least 1 (SQ3)")));
    }
    if !(rho > nu - 2.0) {
        return Err(Error::ParameterDomain(format!(
            "rho = {rho} must lie in (nu - 2, inf) = ({}, inf) (SQ3)",
            nu - 2.0
        )));
    }
    let mut b = Builder::new("SQ3").param("rho", rho).param("b", bb).param("nu", nu);
    let start = scheme.limit_start(LIMIT_DECADES);
    let extreme = scheme.radii.len() - 1;
    let excess = |t: f64, u: &[f64]| dot(&grad(pot, t, u), u) - 2.0 * pot.value(t, u);
    b.limit(
        scan(scheme, start..scheme.radii.len(), "(<gradW,u> - 2W)/|u|^rho >= b", |t, u, r| {
            margin(excess(t, u) / r.powf(rho), bb)
        }),
        extreme,
        "(<gradW,u> - 2W)/|u|^rho >= b",
    );
    match onset_radius(scheme, |t, u, r| excess(t, u) >= 0.25 * bb * r.powf(rho)) {
        Some(l0) => b.extra("L0", l0),
        None => b.note("<gradW,u> - 2W >= (b/4)|u|^rho fails at the largest shell; L0 not found".into()),
    }
    Ok(b.finish())
}

/// Evenness: `|W(t,u) - W(t,-u)| ≤ 1e-12(1 + |W|)`. Margins are 0 within
/// the tolerance and the (negative) excess beyond it.
pub fn audit_even(pot: &dyn Potential, scheme: &SampleScheme) -> Result<AuditReport> {
    check_dim(pot, scheme)?;
    let mut b = Builder::new("even").param("tolerance", 1e-12);
    b.pointwise(scan(scheme, 0..scheme.radii.len(), "W(t,u) = W(t,-u)", |t, u, _| {
        let w = pot.value(t, u);
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        let diff = (w - pot.value(t, &neg)).abs();
        -(diff - 1e-12 * (1.0 + w.abs())).max(0.0)
    }));
    Ok(b.finish())
}

/// Relative tolerance of [`audit_grad_consistency`].
pub const GRAD_CONSISTENCY_TOL: f64 = 1e-5;

/// Central differences of `W` against `∇W` on samples with `|u| ≥ 1e-2`.
pub fn audit_grad_consistency(pot: &dyn Potential, scheme: &SampleScheme) -> Result<AuditReport> {
    check_dim(pot, scheme)?;
    let mut b = Builder::new("grad-consistency").param("tolerance", GRAD_CONSISTENCY_TOL);
    let start = scheme.radii.iter().position(|&r| r >= 1e-2).unwrap_or(scheme.radii.len());
    b.pointwise(scan(scheme, start..scheme.radii.len(), "gradW = FD(W)", |t, u, r| {
        let g = grad(pot, t, u);
        let h = 1e-5 * r;
        let mut x = u.to_vec();
        let mut err = 0.0f64;
        let mut fd = vec![0.0; u.len()];
        for i in 0..u.len() {
            x[i] = u[i] + h;
            let wp = pot.value(t, &x);
            x[i] = u[i] - h;
            let wm = pot.value(t, &x);
            x[i] = u[i];
            fd[i] = (wp - wm) / (2.0 * h);
        }
        for i in 0..u.len() {
            err = err.max((g[i] - fd[i]).abs());
        }
        let scale = norm(&g).max(norm(&fd)).max(f64::MIN_POSITIVE);
        -(err / scale - GRAD_CONSISTENCY_TOL).max(0.0)
    }));
    Ok(b.finish())
}

/// The audits of a mode plus evenness and gradient consistency.
pub fn audit_mode(pot: &dyn Potential, hyp: &Hypotheses, mode: Mode, scheme: &SampleScheme) -> Result<Vec<AuditReport>> {
    let mut out = match mode {
        Mode::Asymptotic => vec![audit_aq1(pot, hyp, scheme)?, audit_aq2(pot, hyp, scheme)?, audit_aq3(pot, hyp, scheme)?],
        Mode::Superquadratic => vec![audit_sq1(pot, hyp, scheme)?, audit_sq2(pot, scheme)?, audit_sq3(pot, hyp, scheme)?],
    };
    out.push(audit_even(pot, scheme)?);
    out.push(audit_grad_consistency(pot, scheme)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{FnPotential, PowerPotential};

    fn scheme(dim: usize) -> SampleScheme {
        let grid = TimeGrid::new(1.0, 4, dim).unwrap();
        SampleScheme::for_grid(&grid, 42).unwrap()
    }

    #[test]
    fn ladder_hits_decades() {
        let s = scheme(1);
        assert_eq!(s.radii.len(), 61);
        assert_eq!(s.radii[30], 1.0);
        assert_eq!(s.limit_start(3.0), 38);
        assert_eq!(s.small_end(3.0), 22);
        assert_eq!(s.directions.len(), 2);
        let s3 = scheme(3);
        assert_eq!(s3.directions.len(), 32);
        assert!(s3.directions.iter().all(|d| (norm(d) - 1.0).abs() < 1e-14));
        assert_eq!(scheme(6).directions.len(), 64);
    }

    #[test]
    fn deterministic_under_seed() {
        let w = PowerPotential::new(1.0, 3.0, 2).unwrap();
        let h = Hypotheses { mu: Some(1.9), r1: Some(1.0), ..Default::default() };
        let a = serde_json::to_string(&audit_aq1(&w, &h, &scheme(2)).unwrap()).unwrap();
        let b = serde_json::to_string(&audit_aq1(&w, &h, &scheme(2)).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimators() {
        let w = PowerPotential::new(1.0, 1.5, 1).unwrap();
        let c1 = estimate_c1(&w, &scheme(1), 1.5);
        assert!(c1 > 0.0 && c1 <= 1.0);
        let q = PowerPotential::quartic(1);
        assert_eq!(estimate_a2(&q, &scheme(1), 1.0, 4.0), 0.0);
    }

    #[test]
    fn odd_term_breaks_evenness() {
        let w = FnPotential::new("u1|u|^2", 2, |_, u| u[0] * (u[0] * u[0] + u[1] * u[1]), |_, u, g| {
            let r2 = u[0] * u[0] + u[1] * u[1];
            g[0] = r2 + 2.0 * u[0] * u[0];
            g[1] = 2.0 * u[0] * u[1];
        });
        let rep = audit_even(&w, &scheme(2)).unwrap();
        assert_eq!(rep.verdict, Verdict::Violated);
        let v = &rep.violations[0];
        let neg: Vec<f64> = v.u.iter().map(|x| -x).collect();
        assert!((w.value(v.t, &v.u) - w.value(v.t, &neg)).abs() > 1e-12);
        let cons = audit_grad_consistency(&w, &scheme(2)).unwrap();
        assert_eq!(cons.verdict, Verdict::NoViolationFound);
    }
}
