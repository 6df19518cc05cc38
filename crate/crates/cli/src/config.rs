//! Run configuration: a single TOML file, validated in one pass that
//! collects every problem instead of stopping at the first.

use std::path::PathBuf;
use std::sync::Arc;

use serde::Serialize;
use toml::{Table, Value};
use varorbit::expr::{Expr, ExprPotential};
use varorbit::solver::SolverConfig;
use varorbit::{Hypotheses, MatrixPath, Mode, Potential, PowerPotential, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum USpec {
    Zero,
    Constant { omega_sq: f64 },
    /// Diagonal entries per node: `samples[j][a]`.
    Diagonal { samples: Vec<Vec<f64>> },
    /// One expression in `t` per diagonal entry.
    Expression { diagonal: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum PotentialSpec {
    Builtin { name: String, coeff: f64, exponent: f64, modulation: f64 },
    Expression { value: String, gradient: Option<Vec<String>>, even: bool },
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemConfig {
    pub period: f64,
    pub dim: usize,
    pub nodes: usize,
    pub u: USpec,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryBlock {
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub lambdas: Vec<f64>,
    pub starts: usize,
    pub rho_factor: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationBlock {
    pub refine_nodes: Option<usize>,
    pub refine_k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: Option<Mode>,
    pub problem: ProblemConfig,
    pub potential: PotentialSpec,
    pub hypotheses: Hypotheses,
    pub solver: SolverConfig,
    pub geometry: GeometryBlock,
    pub validation: ValidationBlock,
    pub output: OutputBlock,
}

#[derive(Debug)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration: {}", self.0.join("; "))
    }
}

impl std::error::Error for ConfigErrors {}

struct Reader {
    errors: Vec<String>,
}

impl Reader {
    fn section<'a>(&mut self, root: &'a Table, name: &str, allowed: &[&str]) -> Option<&'a Table> {
        match root.get(name) {
            None => None,
            Some(Value::Table(t)) => {
                self.unknown(t, name, allowed);
                Some(t)
            }
            Some(_) => {
                self.errors.push(format!("[{name}] must be a table"));
                None
            }
        }
    }

    fn unknown(&mut self, t: &Table, path: &str, allowed: &[&str]) {
        for key in t.keys() {
            if !allowed.contains(&key.as_str()) {
                let at = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                self.errors.push(format!("unknown key `{at}`"));
            }
        }
    }

    fn float(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<f64> {
        match t?.get(key)? {
            Value::Float(v) => Some(*v),
            Value::Integer(v) => Some(*v as f64),
            Value::String(s) => match Expr::parse(s, 1) {
                Ok(e) if !e.uses_time() => Some(e.eval(0.0, 0.0, &[0.0])),
                _ => {
                    self.errors.push(format!("`{path}.{key}`: cannot evaluate constant expression {s:?}"));
                    None
                }
            },
            other => {
                self.errors.push(format!("`{path}.{key}` must be a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn uint(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<usize> {
        match t?.get(key)? {
            Value::Integer(v) if *v >= 0 => Some(*v as usize),
            other => {
                self.errors.push(format!("`{path}.{key}` must be a nonnegative integer, got {other}"));
                None
            }
        }
    }

    fn string(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<String> {
        match t?.get(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.errors.push(format!("`{path}.{key}` must be a string, got {}", other.type_str()));
                None
            }
        }
    }

    fn boolean(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<bool> {
        match t?.get(key)? {
            Value::Boolean(b) => Some(*b),
            other => {
                self.errors.push(format!("`{path}.{key}` must be a boolean, got {}", other.type_str()));
                None
            }
        }
    }

    fn array<'a>(&mut self, t: Option<&'a Table>, path: &str, key: &str) -> Option<&'a Vec<Value>> {
        match t?.get(key)? {
            Value::Array(a) => Some(a),
            other => {
                self.errors.push(format!("`{path}.{key}` must be an array, got {}", other.type_str()));
                None
            }
        }
    }

    fn floats(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<Vec<f64>> {
        let arr = self.array(t, path, key)?;
        let mut out = Vec::with_capacity(arr.len());
        for v in arr {
            match v {
                Value::Float(x) => out.push(*x),
                Value::Integer(x) => out.push(*x as f64),
                other => {
                    self.errors.push(format!("`{path}.{key}` entries must be numbers, got {}", other.type_str()));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn strings(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<Vec<String>> {
        let arr = self.array(t, path, key)?;
        let mut out = Vec::with_capacity(arr.len());
        for v in arr {
            match v {
                Value::String(s) => out.push(s.clone()),
                other => {
                    self.errors.push(format!("`{path}.{key}` entries must be strings, got {}", other.type_str()));
                    return None;
                }
            }
        }
        Some(out)
    }
}

fn parse_mode(s: &str) -> Option<Mode> {
    match s.to_ascii_lowercase().as_str() {
        "asymptotic" | "aq" => Some(Mode::Asymptotic),
        "superquadratic" | "sq" => Some(Mode::Superquadratic),
        _ => None,
    }
}

/// Parses and validates a configuration, returning every problem found.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigErrors(vec![format!("TOML syntax: {}", e.message())]))?;
    let mut r = Reader { errors: Vec::new() };
    r.unknown(
        &root,
        "",
        &["seed", "mode", "problem", "potential", "hypotheses", "solver", "geometry", "validation", "output"],
    );
    let top = Some(&root);
    let seed = r.uint(top, "", "seed").map_or(42, |v| v as u64);
    let mode = r.string(top, "", "mode").and_then(|s| {
        let m = parse_mode(&s);
        if m.is_none() {
            r.errors.push(format!("`mode` must be \"asymptotic\" or \"superquadratic\", got {s:?}"));
        }
        m
    });

    let problem = r.section(&root, "problem", &["period", "dim", "nodes", "u"]);
    if problem.is_none() {
        r.errors.push("missing [problem] section".into());
    }
    let period = r.float(problem, "problem", "period").unwrap_or(2.0 * std::f64::consts::PI);
    let dim = r.uint(problem, "problem", "dim").unwrap_or(1);
    let nodes = r.uint(problem, "problem", "nodes").unwrap_or(64);
    if let Err(e) = TimeGrid::new(period, nodes, dim) {
        r.errors.push(format!("[problem]: {e}"));
    }
    let u = match problem.and_then(|p| p.get("u")) {
        None => USpec::Zero,
        Some(Value::Table(ut)) => {
            r.unknown(ut, "problem.u", &["kind", "omega_sq", "samples", "diagonal"]);
            let ut = Some(ut);
            match r.string(ut, "problem.u", "kind").as_deref() {
                Some("zero") | None => USpec::Zero,
                Some("constant") => USpec::Constant { omega_sq: r.float(ut, "problem.u", "omega_sq").unwrap_or_else(|| {
                    r.errors.push("`problem.u.omega_sq` is required for kind = \"constant\"".into());
                    0.0
                }) },
                Some("diagonal") => {
                    let rows = r.array(ut, "problem.u", "samples").cloned().unwrap_or_default();
                    let mut samples = Vec::new();
                    for row in &rows {
                        let vals: Option<Vec<f64>> = match row {
                            Value::Array(a) => a.iter().map(|v| v.as_float().or(v.as_integer().map(|i| i as f64))).collect(),
                            Value::Float(x) => Some(vec![*x]),
                            Value::Integer(x) => Some(vec![*x as f64]),
                            _ => None,
                        };
                        match vals {
                            Some(v) if v.len() == dim => samples.push(v),
                            _ => {
                                r.errors.push(format!("`problem.u.samples` rows must hold {dim} numbers"));
                                break;
                            }
                        }
                    }
                    if samples.len() != nodes {
                        r.errors.push(format!("`problem.u.samples` needs {nodes} rows, got {}", samples.len()));
                    }
                    USpec::Diagonal { samples }
                }
                Some("expression") => {
                    let diagonal = r.strings(ut, "problem.u", "diagonal").unwrap_or_default();
                    if diagonal.len() != dim {
                        r.errors.push(format!("`problem.u.diagonal` needs {dim} expressions"));
                    }
                    for s in &diagonal {
                        // parsed with no loop components: only t, T and pi may appear
                        if let Err(e) = Expr::parse(s, 0) {
                            r.errors.push(format!("`problem.u.diagonal` may only use t, T and pi: {e}"));
                        }
                    }
                    USpec::Expression { diagonal }
                }
                Some(other) => {
                    r.errors.push(format!("unknown `problem.u.kind` {other:?}"));
                    USpec::Zero
                }
            }
        }
        Some(_) => {
            r.errors.push("`problem.u` must be a table".into());
            USpec::Zero
        }
    };

    let pot = r.section(&root, "potential", &["builtin", "coeff", "exponent", "modulation", "expression", "gradient", "even"]);
    if pot.is_none() {
        r.errors.push("missing [potential] section".into());
    }
    let builtin = r.string(pot, "potential", "builtin");
    let expression = r.string(pot, "potential", "expression");
    let potential = match (builtin, expression) {
        (Some(_), Some(_)) => {
            r.errors.push("[potential]: give either `builtin` or `expression`, not both".into());
            None
        }
        (Some(name), None) => {
            let coeff = r.float(pot, "potential", "coeff").unwrap_or(if name == "quartic" { 0.25 } else { 1.0 });
            let exponent = r.float(pot, "potential", "exponent");
            let modulation = r.float(pot, "potential", "modulation").unwrap_or(0.5);
            let exponent = match (name.as_str(), exponent) {
                ("quartic", e) => e.unwrap_or(4.0),
                ("power" | "modulated", Some(e)) => e,
                ("power" | "modulated", None) => {
                    r.errors.push(format!("`potential.exponent` is required for builtin {name:?}"));
                    2.5
                }
                _ => {
                    r.errors.push(format!("unknown builtin potential {name:?} (quartic, power, modulated)"));
                    4.0
                }
            };
            Some(PotentialSpec::Builtin { name, coeff, exponent, modulation })
        }
        (None, Some(value)) => {
            let gradient = r.strings(pot, "potential", "gradient");
            let even = r.boolean(pot, "potential", "even").unwrap_or(false);
            Some(PotentialSpec::Expression { value, gradient, even })
        }
        (None, None) => {
            if pot.is_some() {
                r.errors.push("[potential]: `builtin` or `expression` is required".into());
            }
            None
        }
    };

    let hyp_t = r.section(&root, "hypotheses", &["mu", "r1", "c2", "r2", "d", "a1", "nu", "rho", "b"]);
    let hypotheses = Hypotheses {
        mu: r.float(hyp_t, "hypotheses", "mu"),
        r1: r.float(hyp_t, "hypotheses", "r1"),
        c2: r.float(hyp_t, "hypotheses", "c2"),
        r2: r.float(hyp_t, "hypotheses", "r2"),
        d: r.float(hyp_t, "hypotheses", "d"),
        a1: r.float(hyp_t, "hypotheses", "a1"),
        nu: r.float(hyp_t, "hypotheses", "nu"),
        rho: r.float(hyp_t, "hypotheses", "rho"),
        b: r.float(hyp_t, "hypotheses", "b"),
    };
    r.errors.extend(hypotheses.domain_errors().into_iter().map(|e| format!("[hypotheses]: {e}")));
    if let Some(m) = mode {
        for name in hypotheses.missing_for(m) {
            r.errors.push(format!("[hypotheses]: constant `{name}` is required in {m:?} mode"));
        }
    }

    let st = r.section(
        &root,
        "solver",
        &["k", "lambdas", "starts", "radii", "tol_g", "max_iter", "dedup_dist"],
    );
    let d = SolverConfig::default();
    let solver = SolverConfig {
        k: r.uint(st, "solver", "k").unwrap_or(d.k),
        lambdas: r.floats(st, "solver", "lambdas").unwrap_or(d.lambdas),
        starts: r.uint(st, "solver", "starts").unwrap_or(d.starts),
        radii: r.floats(st, "solver", "radii").unwrap_or(d.radii),
        tol_g: r.float(st, "solver", "tol_g").unwrap_or(d.tol_g),
        max_iter: r.uint(st, "solver", "max_iter").unwrap_or(d.max_iter),
        dedup_dist: r.float(st, "solver", "dedup_dist").unwrap_or(d.dedup_dist),
        seed,
        mode: mode.unwrap_or(Mode::Superquadratic),
    };
    if let Err(e) = solver.validate() {
        r.errors.push(format!("[solver]: {e}"));
    }
    if solver.k == 0 || solver.k > nodes * dim {
        r.errors.push(format!("[solver]: k = {} must lie in 1..={}", solver.k, nodes * dim));
    }

    let gt = r.section(&root, "geometry", &["k_min", "k_max", "lambdas", "starts", "rho_factor"]);
    let geometry = GeometryBlock {
        k_min: r.uint(gt, "geometry", "k_min"),
        k_max: r.uint(gt, "geometry", "k_max"),
        lambdas: r.floats(gt, "geometry", "lambdas").unwrap_or_else(|| vec![1.0, 2.0]),
        starts: r.uint(gt, "geometry", "starts").unwrap_or(64),
        rho_factor: r.float(gt, "geometry", "rho_factor").unwrap_or(8.0),
    };
    if let (Some(a), Some(b)) = (geometry.k_min, geometry.k_max) {
        if a > b {
            r.errors.push(format!("[geometry]: k_min = {a} exceeds k_max = {b}"));
        }
    }
    if geometry.lambdas.iter().any(|l| !(*l > 0.0)) {
        r.errors.push("[geometry]: lambdas must be positive".into());
    }

    let vt = r.section(&root, "validation", &["refine_nodes", "refine_k"]);
    let validation = ValidationBlock {
        refine_nodes: r.uint(vt, "validation", "refine_nodes"),
        refine_k: r.uint(vt, "validation", "refine_k"),
    };
    if let Some(m) = validation.refine_nodes {
        if m < nodes || m % 2 != 0 {
            r.errors.push(format!("[validation]: refine_nodes = {m} must be even and at least {nodes}"));
        }
    }

    let ot = r.section(&root, "output", &["dir", "formats"]);
    let dir = r.string(ot, "output", "dir").map(PathBuf::from);
    let formats = match r.strings(ot, "output", "formats") {
        None => vec![Format::Csv, Format::Json],
        Some(list) => list
            .iter()
            .filter_map(|f| match f.as_str() {
                "csv" => Some(Format::Csv),
                "json" => Some(Format::Json),
                other => {
                    r.errors.push(format!("[output]: unknown format {other:?}"));
                    None
                }
            })
            .collect(),
    };

    let cfg = potential.map(|potential| RunConfig {
        seed,
        mode,
        problem: ProblemConfig { period, dim, nodes, u },
        potential,
        hypotheses,
        solver,
        geometry,
        validation,
        output: OutputBlock { dir, formats },
    });
    if let Some(c) = &cfg {
        if let Err(e) = c.build_potential() {
            r.errors.push(format!("[potential]: {e}"));
        }
    }
    match cfg {
        Some(c) if r.errors.is_empty() => Ok(c),
        _ => Err(ConfigErrors(r.errors)),
    }
}

impl RunConfig {
    pub fn grid(&self) -> varorbit::Result<TimeGrid> {
        TimeGrid::new(self.problem.period, self.problem.nodes, self.problem.dim)
    }

    pub fn grid_with(&self, nodes: usize) -> varorbit::Result<TimeGrid> {
        TimeGrid::new(self.problem.period, nodes, self.problem.dim)
    }

    pub fn build_potential(&self) -> varorbit::Result<Arc<dyn Potential>> {
        let (dim, period) = (self.problem.dim, self.problem.period);
        Ok(match &self.potential {
            PotentialSpec::Builtin { name, coeff, exponent, modulation } => match name.as_str() {
                "modulated" => Arc::new(PowerPotential::modulated(*coeff, *exponent, *modulation, period, dim)?),
                _ => Arc::new(PowerPotential::new(*coeff, *exponent, dim)?),
            },
            PotentialSpec::Expression { value, gradient, even } => {
                Arc::new(ExprPotential::new(value, gradient.as_deref(), dim, period, *even)?)
            }
        })
    }

    /// Whether `gradW` comes from finite differences of `W`.
    pub fn fd_gradient(&self) -> bool {
        matches!(&self.potential, PotentialSpec::Expression { gradient: None, .. })
    }

    pub fn path(&self, grid: &TimeGrid) -> varorbit::Result<MatrixPath> {
        let n = grid.dim();
        match &self.problem.u {
            USpec::Zero => Ok(MatrixPath::zero(grid)),
            USpec::Constant { omega_sq } => Ok(MatrixPath::constant(grid, *omega_sq)),
            USpec::Diagonal { samples } => {
                if samples.len() != grid.nodes() {
                    return Err(varorbit::Error::GridMismatch(format!(
                        "U samples are given on {} nodes, the grid has {}",
                        samples.len(),
                        grid.nodes()
                    )));
                }
                let mats = samples
                    .iter()
                    .map(|row| nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(row)))
                    .collect();
                MatrixPath::from_samples(grid, mats)
            }
            USpec::Expression { diagonal } => {
                let exprs = diagonal.iter().map(|s| Expr::parse(s, n)).collect::<varorbit::Result<Vec<_>>>()?;
                let zeros = vec![0.0; n];
                let period = grid.period();
                MatrixPath::from_fn(grid, |t| {
                    nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                        n,
                        exprs.iter().map(|e| e.eval(t, period, &zeros)),
                    ))
                })
            }
        }
    }

    /// `ω²` when `U` is a constant scalar, as the shooting oracle needs.
    pub fn constant_scalar_u(&self) -> Option<f64> {
        if self.problem.dim != 1 {
            return None;
        }
        match &self.problem.u {
            USpec::Zero => Some(0.0),
            USpec::Constant { omega_sq } => Some(*omega_sq),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DUFFING: &str = r#"
[problem]
period = "2*pi"
dim = 1
nodes = 64
u = { kind = "zero" }

[potential]
builtin = "quartic"
"#;

    #[test]
    fn minimal_duffing_is_valid() {
        let c = parse_config(DUFFING).unwrap();
        assert!((c.problem.period - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(c.problem.u, USpec::Zero);
        assert_eq!(c.solver.k, 12);
        assert_eq!(c.seed, 42);
        assert!(c.mode.is_none());
        let p = c.build_potential().unwrap();
        assert_eq!(p.value(0.0, &[2.0]), 4.0);
    }

    #[test]
    fn sq_exponent_domain() {
        let text = format!("mode = \"superquadratic\"\n{DUFFING}\n[hypotheses]\na1 = 1\nnu = 1.5\nrho = 4\nb = 0.4\n");
        let errs = parse_config(&text).unwrap_err();
        assert!(errs.0.iter().any(|e| e.contains("nu must exceed 2")), "{errs}");
    }

    #[test]
    fn rho_at_lower_end_is_rejected() {
        let text = format!("mode = \"sq\"\n{DUFFING}\n[hypotheses]\na1 = 1\nnu = 4\nrho = 2\nb = 0.4\n");
        let errs = parse_config(&text).unwrap_err();
        assert!(errs.0.iter().any(|e| e.contains("(nu - 2, inf)")), "{errs}");
    }

    #[test]
    fn all_errors_are_collected() {
        let text = "seed = -1\nbogus = 1\n[problem]\nnodes = 63\nperiod = true\n[potential]\nbuiltin = \"nope\"\n[solver]\nlambdas = [2, 1.5]\ntol_g = 0\n";
        let errs = parse_config(text).unwrap_err();
        let all = errs.to_string();
        for needle in ["bogus", "seed", "period", "nope", "end at 1", "positive", "even"] {
            assert!(all.contains(needle), "missing {needle:?} in {all}");
        }
        assert!(errs.0.len() >= 6);
    }

    #[test]
    fn missing_mode_constants_are_listed() {
        let text = format!("mode = \"asymptotic\"\n{DUFFING}\n[hypotheses]\nmu = 1.5\n");
        let errs = parse_config(&text).unwrap_err();
        for c in ["r1", "c2", "r2", "d"] {
            assert!(errs.0.iter().any(|e| e.contains(&format!("`{c}`"))), "{errs}");
        }
    }

    #[test]
    fn expression_potentials_and_paths() {
        let text = r#"
[problem]
nodes = 16
u = { kind = "expression", diagonal = ["1 + 0.5*cos(2*pi*t/T)"] }
[potential]
expression = "0.25*r^4"
even = true
"#;
        let c = parse_config(text).unwrap();
        assert!(c.fd_gradient());
        let grid = c.grid().unwrap();
        let path = c.path(&grid).unwrap();
        assert!((path.sample(0)[(0, 0)] - 1.5).abs() < 1e-15);
        let bad = text.replace("0.25*r^4", "0.25*r^^4");
        assert!(parse_config(&bad).unwrap_err().to_string().contains("[potential]"));
    }
}
