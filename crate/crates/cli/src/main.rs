//! `varorbit`: batch front-end for the periodic-orbit pipeline.

mod config;
mod output;
mod pipeline;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use crate::config::parse_config;
use crate::output::{sha256_hex, ArtifactRecord, ArtifactWriter};
use crate::pipeline::{Command, Pipeline};

/// Environment variable overriding the output directory of the config file.
const OUT_ENV: &str = "VARORBIT_OUT";

#[derive(Parser, Debug)]
#[command(name = "varorbit", version, about = "Variational search for periodic orbits of second-order Hamiltonian systems")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (takes precedence over VARORBIT_OUT and the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Exit with status 2 when a hypothesis audit reports a violation.
    #[arg(long)]
    gate_on_audit: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: Command,
    config_path: String,
    config_sha256: String,
    seed: u64,
    mode: Option<varorbit::Mode>,
    jobs: usize,
    exit_code: u8,
    audit_gate: bool,
    audit_violations: Vec<String>,
    artifacts: &'a [ArtifactRecord],
    wall_times_s: &'a BTreeMap<String, f64>,
    solve_diagnostics: Option<&'a varorbit::solver::MultistartDiagnostics>,
    gradient_audit: Option<&'a varorbit::audit::AuditReport>,
    notes: &'a [String],
}

#[derive(Serialize)]
struct ErrorReport {
    error: ErrorBody,
}

#[derive(Serialize)]
struct ErrorBody {
    kind: &'static str,
    messages: Vec<String>,
}

fn fail(kind: &'static str, messages: Vec<String>) -> ExitCode {
    let report = ErrorReport { error: ErrorBody { kind, messages } };
    eprintln!("{}", output::to_json(&report, false).unwrap_or_else(|_| "{\"error\":{}}".into()));
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let text = match std::fs::read(&cli.config) {
        Ok(t) => t,
        Err(e) => return fail("io", vec![format!("{}: {e}", cli.config.display())]),
    };
    let parsed = match std::str::from_utf8(&text) {
        Ok(s) => parse_config(s).map_err(|e| e.0),
        Err(e) => Err(vec![format!("config is not UTF-8: {e}")]),
    };
    let mut cfg = match parsed {
        Ok(c) => c,
        Err(msgs) => return fail("config", msgs),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.solver.seed = seed;
    }
    let jobs = cli.jobs.unwrap_or_else(rayon::current_num_threads);
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            return fail("runtime", vec![format!("thread pool: {e}")]);
        }
    }
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let writer = match ArtifactWriter::new(&out) {
        Ok(w) => w,
        Err(e) => return fail("io", vec![format!("{}: {e}", out.display())]),
    };
    let mut pipeline = match Pipeline::new(&cfg, writer) {
        Ok(p) => p,
        Err(e) => return fail("runtime", vec![format!("{e:#}")]),
    };
    let outcome = match pipeline.run(cli.command) {
        Ok(o) => o,
        Err(e) => return fail("runtime", vec![format!("{e:#}")]),
    };
    let gated = cli.gate_on_audit && !outcome.audit_violations.is_empty();
    let exit_code = if gated { 2 } else { 0 };
    let artifacts = pipeline.writer.written.clone();
    let manifest = Manifest {
        tool: "varorbit",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command,
        config_path: cli.config.display().to_string(),
        config_sha256: sha256_hex(&text),
        seed: cfg.seed,
        mode: cfg.mode,
        jobs,
        exit_code,
        audit_gate: cli.gate_on_audit,
        audit_violations: outcome.audit_violations,
        artifacts: &artifacts,
        wall_times_s: &pipeline.times,
        solve_diagnostics: pipeline.diagnostics.as_ref(),
        gradient_audit: pipeline.gradient_audit.as_ref(),
        notes: &pipeline.notes,
    };
    if let Err(e) = pipeline.writer.write_json("manifest.json", &manifest) {
        return fail("io", vec![format!("manifest: {e:#}")]);
    }
    ExitCode::from(exit_code)
}
