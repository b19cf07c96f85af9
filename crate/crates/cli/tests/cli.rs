use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn orlicz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orlicz"))
        .args(args)
        .env_remove("ORLICZ_BUDGET_CAP")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_constant(dir: &Path, name: &str, value: &str) -> std::path::PathBuf {
    let f = dir.join(name);
    let out = orlicz(&[
        "gen", "--kind", "constant", "--dim", "2", "--half-width", "2", "--resolution", "2", "--value", value,
        "--out", path(&f),
    ]);
    assert!(out.status.success());
    f
}

#[test]
fn bp_check_power_converges() {
    let out = orlicz(&["bp", "check", "--phi", r#"{"kind":"power","r":1.5}"#, "--p", "2", "--n", "2", "--mode", "bp_star"]);
    let doc = stdout_json(&out);
    assert_eq!(doc["result"]["label"], "Converges");
    assert_eq!(doc["run_config"]["exponents"][0], 2.0);
    assert_eq!(doc["run_config"]["params"]["mode"], "bp_star");
}

#[test]
fn maximal_of_one_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen_constant(dir.path(), "f.grid", "1");
    let m = dir.path().join("m.grid");
    let out = orlicz(&["maximal", "--input", path(&f), "--basis", "rect", "--out", path(&m)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&m).unwrap();
    let grid = orlicz_core::grid::GridFunction::parse(&text).unwrap();
    assert!(grid.values().iter().all(|&v| v == 1.0));
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.grid.json")).unwrap()).unwrap();
    assert_eq!(sidecar["run_config"]["command"], "maximal");
    assert_eq!(sidecar["run_config"]["inputs"][0], path(&f));
}

#[test]
fn counterexample_growth_is_strictly_increasing() {
    let out = orlicz(&["verify", "--suite", "counterexample", "--config", r#"{"cutoffs":[16,32,64,128]}"#]);
    let doc = stdout_json(&out);
    let partials: Vec<f64> = doc["result"]["counterexample"]["partials"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(partials.len(), 4);
    assert!(partials.windows(2).all(|w| w[1] > w[0]), "{partials:?}");
    assert_eq!(doc["result"]["increments_nondecreasing"], true);
}

#[test]
fn validation_errors_exit_one() {
    let bad_phi = orlicz(&["bp", "check", "--phi", r#"{"kind":"nope"}"#, "--p", "2", "--n", "2"]);
    assert_eq!(bad_phi.status.code(), Some(1));
    assert_eq!(stderr_json(&bad_phi)["error"]["exit_code"], 1);

    let bad_cmd = orlicz(&["frobnicate"]);
    assert_eq!(bad_cmd.status.code(), Some(1));
    assert_eq!(stderr_json(&bad_cmd)["error"]["kind"], "usage");

    let bad_p = orlicz(&["bp", "check", "--phi", r#"{"kind":"power","r":2}"#, "--p", "0.5", "--n", "2"]);
    assert_eq!(bad_p.status.code(), Some(1));
}

#[test]
fn budget_exhaustion_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen_constant(dir.path(), "f.grid", "1");
    let m = dir.path().join("m.grid");
    let out = orlicz(&["--budget", "10", "maximal", "--input", path(&f), "--out", path(&m)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "computational");
    assert!(!m.exists());

    let env = Command::new(env!("CARGO_BIN_EXE_orlicz"))
        .args(["maximal", "--input", path(&f), "--out", path(&m)])
        .env("ORLICZ_BUDGET_CAP", "10")
        .output()
        .unwrap();
    assert_eq!(env.status.code(), Some(2));
}

#[test]
fn invalid_config_fails_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.json");
    let unknown = orlicz(&["verify", "--suite", "holder", "--config", r#"{"triples":10,"typo":1}"#, "--out", path(&out_path)]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(!out_path.exists());

    let missing = orlicz(&["weights", "test", "--kind", "ap", "--config", r#"{"w":"/nonexistent/w.grid"}"#]);
    assert_eq!(missing.status.code(), Some(1));

    let zero = dir.path().join("z.grid");
    gen_constant(dir.path(), "z.grid", "0");
    let config = format!(r#"{{"w":"{}"}}"#, path(&zero));
    let vanishing = orlicz(&["weights", "test", "--kind", "ap", "--config", &config]);
    assert_eq!(vanishing.status.code(), Some(1));
}

#[test]
fn replaying_argv_reproduces_output() {
    let args = ["verify", "--suite", "holder", "--config", r#"{"triples":200,"seed":5}"#];
    let first = orlicz(&args);
    let doc = stdout_json(&first);
    let argv: Vec<String> =
        doc["run_config"]["argv"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    assert_eq!(&argv[1..], &args);
    let replay = orlicz(&argv[1..].iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(first.stdout, replay.stdout);
    assert_eq!(doc["result"]["pass"], true);
}

#[test]
fn gen_is_deterministic_in_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let f = dir.path().join(name);
        let out = orlicz(&[
            "gen", "--kind", "uniform", "--dim", "3", "--half-width", "1", "--resolution", "2", "--seed", seed,
            "--out", path(&f),
        ]);
        assert!(out.status.success());
        std::fs::read_to_string(f).unwrap()
    };
    assert_eq!(run("a.grid", "4"), run("b.grid", "4"));
    assert_ne!(run("c.grid", "4"), run("d.grid", "5"));
}

#[test]
fn young_and_covering_report() {
    let young = stdout_json(&orlicz(&["young", "--phi", r#"{"kind":"power","r":2}"#, "--points", "3"]));
    let rows = young["result"]["samples"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let (t, bar) = (row["t"].as_f64().unwrap(), row["complement"].as_f64().unwrap());
        assert!((bar - t * t / 4.0).abs() <= 1e-8 * (t * t / 4.0));
    }

    let family = r#"{"shape":[8,8],"rects":[[[0,4],[0,2]],[[1,3],[1,7]],[[2,8],[0,3]]]}"#;
    let cov = stdout_json(&orlicz(&["covering", "demo", "--family", family, "--alpha", "0.5"]));
    assert_eq!(cov["result"]["check"]["ok"], true);
    assert_eq!(cov["result"]["overlap"]["pass"], true);
}

#[test]
fn help_exits_zero() {
    assert_eq!(orlicz(&["--help"]).status.code(), Some(0));
}
