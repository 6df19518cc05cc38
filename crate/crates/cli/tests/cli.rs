use std::path::Path;
use std::process::{Command, Output};

const DUFFING: &str = r#"
seed = 3
[problem]
period = "2*pi"
dim = 1
nodes = 32
u = { kind = "zero" }
[potential]
builtin = "quartic"
[solver]
k = 8
"#;

fn run(dir: &Path, config: &str, args: &[&str], env_out: Option<&Path>) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_varorbit"));
    cmd.args(args).arg("--config").arg(&cfg).env_remove("VARORBIT_OUT");
    if let Some(out) = env_out {
        cmd.env("VARORBIT_OUT", out);
    }
    cmd.output().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn duffing_solve_writes_solutions_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(tmp.path(), DUFFING, &["solve", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("solutions.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.len() >= 3, "{} solutions", lines.len());
    for l in &lines {
        assert_eq!(l["lambda"], 1.0);
        assert!(l["grad_norm"].as_f64().unwrap() < 1e-8);
        assert_eq!(l["values"].as_array().unwrap().len(), 32);
    }
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["command"], "solve");
    assert_eq!(m["seed"], 3);
    assert_eq!(m["exit_code"], 0);
    let names: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["solutions.jsonl"]);
}

#[test]
fn solutions_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(tmp.path(), DUFFING, &["solve", "--out", a.to_str().unwrap()], None).status.success());
    assert!(run(tmp.path(), DUFFING, &["solve", "--jobs", "2", "--out", b.to_str().unwrap()], None).status.success());
    assert_eq!(std::fs::read(a.join("solutions.jsonl")).unwrap(), std::fs::read(b.join("solutions.jsonl")).unwrap());
}

#[test]
fn cubic_potential_declared_asymptotic_trips_the_gate() {
    let config = r#"
mode = "asymptotic"
[problem]
nodes = 32
u = { kind = "zero" }
[potential]
builtin = "power"
coeff = 0.25
exponent = 3
[hypotheses]
mu = 1.9
r1 = 1
c2 = 1
r2 = 1
d = 1
"#;
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(tmp.path(), config, &["audit", "--gate-on-audit", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let audit = json(&out.join("audit.json"));
    assert!(!audit["violated"].as_array().unwrap().is_empty());
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["exit_code"], 2);

    let again = run(tmp.path(), config, &["audit", "--out", out.to_str().unwrap()], None);
    assert_eq!(again.status.code(), Some(0));
}

#[test]
fn spectrum_of_unit_constant_path() {
    let config = "[problem]\nnodes = 32\nu = { kind = \"constant\", omega_sq = 1 }\n[potential]\nbuiltin = \"quartic\"\n";
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), config, &["spectrum", "--out", tmp.path().to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("spectrum.csv")).unwrap();
    let ev: Vec<f64> = csv.lines().skip(1).take(3).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    for (got, want) in ev.iter().zip([-1.0, 0.0, 0.0]) {
        assert!((got - want).abs() < 1e-10, "{ev:?}");
    }
}

#[test]
fn bad_config_reports_every_error() {
    let config = "seed = -1\nbogus = 1\n[problem]\nnodes = 63\n[potential]\nbuiltin = \"nope\"\n";
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), config, &["solve", "--out", tmp.path().join("o").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["messages"].as_array().unwrap().len() >= 4, "{err}");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn environment_overrides_config_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let from_env = tmp.path().join("env");
    let config = format!("{DUFFING}\n[output]\ndir = {:?}\n", tmp.path().join("cfg").to_str().unwrap());
    let o = run(tmp.path(), &config, &["spectrum"], Some(&from_env));
    assert!(o.status.success());
    assert!(from_env.join("spectrum.csv").exists());
    assert!(!tmp.path().join("cfg").exists());

    let flag = tmp.path().join("flag");
    let o = run(tmp.path(), &config, &["spectrum", "--out", flag.to_str().unwrap()], Some(&from_env));
    assert!(o.status.success());
    assert!(flag.join("manifest.json").exists());
}

#[test]
fn audit_without_mode_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), DUFFING, &["audit", "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mode"));
}

#[test]
fn expression_potential_without_gradient_is_audited() {
    let config = "[problem]\nnodes = 32\nu = { kind = \"zero\" }\n[potential]\nexpression = \"0.25*r^4\"\neven = true\n[solver]\nk = 6\n";
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), config, &["spectrum", "--out", tmp.path().to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&tmp.path().join("manifest.json"));
    assert_eq!(m["gradient_audit"]["condition"], "grad-consistency");
    assert_eq!(m["gradient_audit"]["verdict"], "no-violation-found");
}
