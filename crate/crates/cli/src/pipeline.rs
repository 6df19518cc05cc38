//! Pipeline stages: spectrum, audit, geometry, solve, validate.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use varorbit::audit::{audit_grad_consistency, audit_mode, AuditReport, SampleScheme, Verdict};
use varorbit::fourier::TrigInterpolant;
use varorbit::geometry::{geometry_table, write_geometry_csv, GeometryConfig};
use varorbit::solver::{
    boundedness_diagnostics, continue_branch, find_critical, multistart_collect, orbit_distance, refine_level,
    BoundednessReport, BranchStatus, CriticalPoint, MultistartDiagnostics, SolverConfig,
};
use varorbit::validation::{compare_to_oracle, strong_residual, weak_residual, ResidualReport, ShootingOracle};
use varorbit::{FunctionalContext, GridFunction, Mode};

use crate::config::{Format, RunConfig};
use crate::output::ArtifactWriter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Spectrum,
    Audit,
    Geometry,
    Solve,
    Validate,
    All,
}

pub struct Pipeline<'a> {
    cfg: &'a RunConfig,
    ctx: FunctionalContext,
    pub writer: ArtifactWriter,
    pub times: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub diagnostics: Option<MultistartDiagnostics>,
    /// Gradient-consistency audit, always run for finite-difference gradients.
    pub gradient_audit: Option<AuditReport>,
    solutions: Option<Vec<CriticalPoint>>,
}

/// Result of a run, before the manifest is written.
pub struct RunOutcome {
    pub audit_violations: Vec<String>,
}

#[derive(Serialize)]
struct AuditArtifact<'a> {
    mode: Mode,
    potential: String,
    fd_gradient: bool,
    violated: Vec<String>,
    reports: &'a [AuditReport],
}

#[derive(Serialize)]
struct SolutionLine<'a> {
    k: usize,
    lambda: f64,
    phi: f64,
    grad_norm: f64,
    residual: f64,
    #[serde(rename = "norm_E")]
    norm_e: f64,
    amplitude: f64,
    min_period_estimate: f64,
    morse: Option<usize>,
    values: Vec<&'a [f64]>,
}

#[derive(Serialize)]
struct RefinementCheck {
    nodes: usize,
    k: usize,
    increment: f64,
    flagged: bool,
    residual: ResidualReport,
    amplitude: f64,
}

#[derive(Serialize)]
struct OracleCheck {
    harmonic: usize,
    oracle_amplitude: f64,
    amplitude_rel_err: f64,
    sup_distance: f64,
}

#[derive(Serialize)]
struct ContinuationCheck {
    start_lambda: f64,
    status: BranchStatus,
    steps: usize,
    endpoint_distance: Option<f64>,
    values: Vec<(f64, f64)>,
    boundedness: Option<BoundednessReport>,
    boundedness_note: Option<String>,
}

#[derive(Serialize)]
struct SolutionCheck {
    index: usize,
    phi: f64,
    norm_e: f64,
    strong: ResidualReport,
    weak_residual: f64,
    weak_ok: bool,
    refinement: Option<RefinementCheck>,
    oracle: Option<OracleCheck>,
    continuation: Option<ContinuationCheck>,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct ValidationSummary {
    solutions: usize,
    all_weak_ok: bool,
    max_strong_residual: f64,
    max_refined_residual: Option<f64>,
    flagged_refinements: usize,
    continuation_converged: usize,
}

#[derive(Serialize)]
struct ValidationArtifact {
    summary: ValidationSummary,
    checks: Vec<SolutionCheck>,
}

fn merge(into: &mut Vec<String>, more: Vec<String>) {
    for c in more {
        if !into.contains(&c) {
            into.push(c);
        }
    }
}

fn amplitude(u: &GridFunction) -> f64 {
    TrigInterpolant::new(u).amplitude().0
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a RunConfig, writer: ArtifactWriter) -> Result<Self> {
        let t = Instant::now();
        let grid = cfg.grid()?;
        let ctx = FunctionalContext::build(grid, cfg.path(&grid)?, cfg.build_potential()?)?;
        let mut times = BTreeMap::new();
        times.insert("setup".to_string(), t.elapsed().as_secs_f64());
        Ok(Self { cfg, ctx, writer, times, notes: Vec::new(), diagnostics: None, gradient_audit: None, solutions: None })
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f(self)?;
        let secs = t.elapsed().as_secs_f64();
        info!("{stage} finished in {secs:.3} s");
        self.times.insert(stage.to_string(), secs);
        Ok(out)
    }

    fn mode(&self, stage: &str) -> Result<Mode> {
        self.cfg.mode.ok_or_else(|| anyhow!("the {stage} stage needs `mode` in the configuration"))
    }

    pub fn run(&mut self, command: Command) -> Result<RunOutcome> {
        let mut outcome = RunOutcome { audit_violations: Vec::new() };
        if self.cfg.fd_gradient() {
            let scheme = SampleScheme::for_grid(self.ctx.grid(), self.cfg.seed)?;
            let report = audit_grad_consistency(self.ctx.potential(), &scheme)?;
            if report.verdict == Verdict::Violated {
                self.notes.push("finite-difference gradient failed the consistency audit".into());
                outcome.audit_violations.push(report.condition.clone());
            }
            self.gradient_audit = Some(report);
        }
        match command {
            Command::Spectrum => self.timed("spectrum", Self::spectrum)?,
            Command::Audit => merge(&mut outcome.audit_violations, self.timed("audit", Self::audit)?),
            Command::Geometry => self.timed("geometry", Self::geometry)?,
            Command::Solve => self.timed("solve", Self::solve)?,
            Command::Validate => {
                self.timed("solve", Self::solve_only)?;
                self.timed("validate", Self::validate)?;
            }
            Command::All => {
                self.timed("spectrum", Self::spectrum)?;
                if self.cfg.mode.is_some() {
                    merge(&mut outcome.audit_violations, self.timed("audit", Self::audit)?);
                    self.timed("geometry", Self::geometry)?;
                } else {
                    self.notes.push("no mode declared: audit and geometry skipped".into());
                }
                self.timed("solve", Self::solve)?;
                self.timed("validate", Self::validate)?;
            }
        }
        Ok(outcome)
    }

    fn spectrum(&mut self) -> Result<()> {
        let mut buf = Vec::new();
        self.ctx.dec().write_spectrum_csv(&mut buf)?;
        self.writer.write("spectrum.csv", &buf)?;
        Ok(())
    }

    fn audit(&mut self) -> Result<Vec<String>> {
        let mode = self.mode("audit")?;
        let scheme = SampleScheme::for_grid(self.ctx.grid(), self.cfg.seed)?;
        let reports = audit_mode(self.ctx.potential(), &self.cfg.hypotheses, mode, &scheme)?;
        let violated: Vec<String> =
            reports.iter().filter(|r| r.verdict == Verdict::Violated).map(|r| r.condition.clone()).collect();
        let artifact = AuditArtifact {
            mode,
            potential: self.ctx.potential().name(),
            fd_gradient: self.cfg.fd_gradient(),
            violated: violated.clone(),
            reports: &reports,
        };
        self.writer.write_json("audit.json", &artifact)?;
        Ok(violated)
    }

    fn geometry(&mut self) -> Result<()> {
        let mode = self.mode("geometry")?;
        let dec = self.ctx.dec();
        let g = &self.cfg.geometry;
        let k_min = g.k_min.unwrap_or(dec.n_bar() + 1);
        let k_max = g.k_max.unwrap_or((dec.n_bar() + 15).min(dec.len()));
        let mut gc = GeometryConfig::new(mode, k_min, k_max);
        gc.lambdas = g.lambdas.clone();
        gc.starts = g.starts;
        gc.seed = self.cfg.seed;
        gc.rho_factor = g.rho_factor;
        let scheme = SampleScheme::for_grid(self.ctx.grid(), self.cfg.seed)?;
        let table = geometry_table(&self.ctx, &self.cfg.hypotheses, &scheme, &gc)?;
        if self.cfg.output.formats.contains(&Format::Csv) {
            let mut buf = Vec::new();
            write_geometry_csv(&table, &mut buf)?;
            self.writer.write("geometry.csv", &buf)?;
        }
        if self.cfg.output.formats.contains(&Format::Json) {
            self.writer.write_json("geometry.json", &table)?;
        }
        Ok(())
    }

    fn solve_only(&mut self) -> Result<()> {
        if self.solutions.is_none() {
            let res = multistart_collect(&self.ctx, 1.0, self.cfg.solver.k, &self.cfg.solver)?;
            self.diagnostics = Some(res.diagnostics);
            self.solutions = Some(res.points);
        }
        Ok(())
    }

    fn solve(&mut self) -> Result<()> {
        self.solve_only()?;
        let period = self.ctx.grid().period();
        let n = self.ctx.grid().dim();
        let mut text = String::new();
        for p in self.solutions.as_deref().unwrap_or_default() {
            let it = TrigInterpolant::new(&p.u);
            let values: Vec<&[f64]> = p.u.values().as_slice().chunks(n).collect();
            let line = SolutionLine {
                k: p.k,
                lambda: p.lambda,
                phi: p.value,
                grad_norm: p.grad_norm,
                residual: p.residual.sup,
                norm_e: p.norm_e,
                amplitude: it.amplitude().0,
                min_period_estimate: period / it.period_divisor(1e-8).unwrap_or(1) as f64,
                morse: p.morse,
                values,
            };
            text.push_str(&crate::output::to_json(&line, false)?);
            text.push('\n');
        }
        self.writer.write("solutions.jsonl", text.as_bytes())?;
        Ok(())
    }

    fn validate(&mut self) -> Result<()> {
        self.solve_only()?;
        let cfg = self.cfg;
        let ctx = &self.ctx;
        let solver = &cfg.solver;
        let m = ctx.grid().nodes();
        let fine_nodes = cfg.validation.refine_nodes.unwrap_or(4 * m);
        let fine = if fine_nodes > m {
            let grid = cfg.grid_with(fine_nodes)?;
            Some(FunctionalContext::new(
                cfg.path(&grid).context("U must be defined on the refinement grid")?,
                std::sync::Arc::new(varorbit::SpectralDecomposition::from_path(grid, &cfg.path(&grid)?, None)?),
                ctx.potential_arc(),
            )?)
        } else {
            None
        };
        let fine_k = fine.as_ref().map(|f| cfg.validation.refine_k.unwrap_or(f.dec().len().min(256)).min(f.dec().len()));
        let pot = ctx.potential();
        let oracle = match cfg.constant_scalar_u() {
            Some(w2) if pot.is_even() && pot.is_autonomous() => ShootingOracle::new(pot, w2).ok(),
            _ => None,
        };
        let growth = match solver.mode {
            Mode::Asymptotic => cfg.hypotheses.mu,
            Mode::Superquadratic => match (cfg.hypotheses.nu, cfg.hypotheses.rho) {
                (Some(nu), Some(rho)) => Some((nu - rho).max(0.0)),
                _ => Some(0.0),
            },
        };
        let sols = self.solutions.as_deref().unwrap_or_default();
        let checks: Vec<SolutionCheck> = sols
            .par_iter()
            .enumerate()
            .map(|(index, p)| -> Result<SolutionCheck> {
                let mut notes = Vec::new();
                let strong = strong_residual(ctx, &p.u)?;
                let weak = weak_residual(ctx, &p.u, p.k)?;
                let refinement = match (&fine, fine_k) {
                    (Some(f), Some(k)) => match refine_level(f, p, k.max(p.k), solver) {
                        Ok(r) => Some((
                            RefinementCheck {
                                nodes: f.grid().nodes(),
                                k: k.max(p.k),
                                increment: r.increment,
                                flagged: r.flagged,
                                residual: strong_residual(f, &r.point.u)?,
                                amplitude: amplitude(&r.point.u),
                            },
                            r.point.u,
                        )),
                        Err(e) => {
                            notes.push(format!("refinement failed: {e}"));
                            None
                        }
                    },
                    _ => None,
                };
                let oracle_check = oracle.as_ref().and_then(|o| {
                    let u = refinement.as_ref().map_or(&p.u, |r| &r.1);
                    let j = TrigInterpolant::new(u).dominant_harmonic()?;
                    match o.orbit(u.grid(), j) {
                        Ok(orb) => Some(OracleCheck {
                            harmonic: j,
                            oracle_amplitude: orb.amplitude,
                            amplitude_rel_err: (amplitude(u) - orb.amplitude).abs() / orb.amplitude,
                            sup_distance: compare_to_oracle(u, &orb).ok()?,
                        }),
                        Err(e) => {
                            notes.push(format!("oracle unavailable: {e}"));
                            None
                        }
                    }
                });
                let continuation = continuation_check(ctx, p, solver, growth);
                Ok(SolutionCheck {
                    index,
                    phi: p.value,
                    norm_e: p.norm_e,
                    strong,
                    weak_residual: weak,
                    weak_ok: weak <= solver.tol_g * (1.0 + p.norm_e),
                    refinement: refinement.map(|r| r.0),
                    oracle: oracle_check,
                    continuation,
                    notes,
                })
            })
            .collect::<Result<_>>()?;
        let summary = ValidationSummary {
            solutions: checks.len(),
            all_weak_ok: checks.iter().all(|c| c.weak_ok),
            max_strong_residual: checks.iter().map(|c| c.strong.sup).fold(0.0, f64::max),
            max_refined_residual: checks
                .iter()
                .filter_map(|c| c.refinement.as_ref().map(|r| r.residual.sup))
                .reduce(f64::max),
            flagged_refinements: checks.iter().filter(|c| c.refinement.as_ref().is_some_and(|r| r.flagged)).count(),
            continuation_converged: checks
                .iter()
                .filter(|c| c.continuation.as_ref().is_some_and(|b| b.status == BranchStatus::ConvergedToOne))
                .count(),
        };
        self.writer.write_json("validation.json", &ValidationArtifact { summary, checks })?;
        Ok(())
    }
}

/// Walks the solution up the λ schedule to its head, continues it back down
/// to 1 and compares the endpoint with the direct solve.
fn continuation_check(
    ctx: &FunctionalContext,
    p: &CriticalPoint,
    solver: &SolverConfig,
    growth: Option<f64>,
) -> Option<ContinuationCheck> {
    let head = *solver.lambdas.first()?;
    if head <= 1.0 {
        return None;
    }
    let mut cur = p.clone();
    for &l in solver.lambdas.iter().rev().skip(1) {
        cur = find_critical(ctx, &cur.u, l, p.k, solver).ok()?;
    }
    let branch = continue_branch(ctx, &cur, solver).ok()?;
    let endpoint_distance = match (branch.status, branch.last()) {
        (BranchStatus::ConvergedToOne, Some(end)) => orbit_distance(ctx, &end.u, &p.u).ok(),
        _ => None,
    };
    let norms: Vec<f64> = branch.points.iter().map(|q| q.norm_e).collect();
    let (boundedness, boundedness_note) = match growth {
        Some(g) => match boundedness_diagnostics(&norms, solver.mode, g) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        },
        None => (None, Some("growth exponent not declared".into())),
    };
    Some(ContinuationCheck {
        start_lambda: head,
        status: branch.status,
        steps: branch.points.len(),
        endpoint_distance,
        values: branch.values(),
        boundedness,
        boundedness_note,
    })
}
