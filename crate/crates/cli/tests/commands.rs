use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn weightlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weightlab")).args(args).output().expect("weightlab runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const CONFIG: &str = r#"
seed = 3

[space]
kind = "dyadic"
levels = 3

[operator]
kind = "product"
arity = 2

[params]
q0 = "2"
p0 = ["4", "4"]
s0 = ["2", "2"]
r0 = ["2", "2"]
gamma_recip = [-0.125, -0.125]

[harness]
trials = 3
dual_samples = 2
opnorm_restarts = 2
opnorm_iterations = 40
"#;

#[test]
fn exponents_solve_completes_the_endpoint_tuple() {
    let out = weightlab(&["exponents", "solve", "--q0", "2", "--p0", "2/3", "--s0", "1", "--r0", "inf", "--q", "inf"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["gamma_recip"].as_f64(), Some(-0.5));
    assert_eq!(v["in_region"], Value::Bool(true));
    let c = &v["complete"];
    assert_eq!(c["p"], "1");
    assert_eq!(c["s"], "2");
    assert_eq!(c["r"], "2");
}

#[test]
fn exponents_solve_rejects_inconsistent_input() {
    let out = weightlab(&["exponents", "solve", "--q0", "2", "--q", "4", "--p0", "2", "--p", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn space_make_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let out = weightlab(&["space", "make", "--kind", "cyclic", "--size", "8"]);
    assert!(out.status.success());
    let path = write(dir.path(), "c8.json", std::str::from_utf8(&out.stdout).unwrap());
    let out = weightlab(&["space", "validate", &path]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["report"]["ok"], Value::Bool(true));

    let bad = write(dir.path(), "bad.json", r#"{"masses": [1, 1, 1], "basis": [[0], [1], [2], [0, 1]]}"#);
    let out = weightlab(&["space", "validate", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_json(&out)["summary"].as_str().unwrap().contains("no set contains both"));
}

#[test]
fn char_and_maxop_on_two_points() {
    let dir = tempfile::tempdir().unwrap();
    let space = write(dir.path(), "s.json", r#"{"masses": [1, 1], "basis": [[0], [1], [0, 1]]}"#);
    let w = write(dir.path(), "w.json", "[1, 2]");
    let out = weightlab(&["char", "--space", &space, "--w", &w, "--v", &w, "--s", "1", "--r", "1"]);
    assert!(out.status.success());
    assert!((stdout_json(&out)["value"].as_f64().unwrap() - 9.0 / 8.0).abs() < 1e-15);

    let out = weightlab(&["maxop", "--space", &space, "--w", &w, "--p", "inf"]);
    let v = stdout_json(&out);
    assert_eq!(v["kind"], "exact");
    assert!(v["witness"].is_array());
    // max over sets of (max w)(mean 1/w): {0,1} gives 2 * 3/4
    assert!((v["value"].as_f64().unwrap() - 1.5).abs() < 1e-15);
}

#[test]
fn rdf_on_the_endpoint_tuple() {
    let dir = tempfile::tempdir().unwrap();
    let space = write(dir.path(), "s.json", r#"{"masses": [0.25, 0.25, 0.25, 0.25], "basis": [[0], [1], [2], [3], [0, 1], [2, 3], [0, 1, 2, 3]]}"#);
    let params = write(
        dir.path(),
        "p.json",
        r#"{"u0": "inf", "p0": "2/3", "s0": "1", "r0": "inf", "u": "2", "p": "1", "s": "2", "r": "2", "gamma_recip": -0.5}"#,
    );
    let w = write(dir.path(), "w.json", "[1, 2, 0.5, 3]");
    let f = write(dir.path(), "f.json", "[1, 0, 2, 1]");
    let h = write(dir.path(), "h.json", "[0.5, 1, 0, 2]");
    let out = weightlab(&["rdf", "--space", &space, "--params", &params, "--w", &w, "--v", &w, "--f", &f, "--h", &h, "--kappa", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    for key in ["char_bound_lhs", "char_bound_rhs", "normprod_lhs", "normprod_rhs"] {
        assert!(v[key].is_number(), "{key}");
    }
}

#[test]
fn extrapolate_writes_report_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "run.toml", CONFIG);
    let (json, csv) = (dir.path().join("r.json"), dir.path().join("t.csv"));
    let out = weightlab(&["extrapolate", "--config", &config, "--json", json.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["payload"]["verdict"], "pass");
    assert_eq!(report["config"]["seed"], 3);
    assert!(report["version"].is_string() && report["wall_time_ms"].is_number());
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table.starts_with("index,verdict,"));
}

#[test]
fn identical_configs_give_identical_payloads() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "run.toml", CONFIG);
    let payload = || {
        let out = weightlab(&["extrapolate", "--config", &config]);
        serde_json::to_vec(&stdout_json(&out)["payload"]).unwrap()
    };
    assert_eq!(payload(), payload());
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "run.toml", &CONFIG.replace("dual_samples", "dual_sample"));
    let out = weightlab(&["extrapolate", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dual_sample"));

    let config = write(dir.path(), "noseed.toml", &CONFIG.replace("seed = 3", ""));
    let out = weightlab(&["extrapolate", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn transfer_doubling_map() {
    let dir = tempfile::tempdir().unwrap();
    let w = write(dir.path(), "w.json", "[1, 2, 0.5, 3]");
    let m = write(dir.path(), "m.json", "[1, 0.5, -0.25, 2, 0, 1, [0.5, 0.5], 3]");
    let out = weightlab(&["transfer", "--H", "4", "--G", "8", "--phi", "2", "--p", "2", "--w", &w, "--m", &m]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["exact"], Value::Bool(true));
    assert_eq!(v["verdict"], "holds");
}

#[test]
fn trace_lists_out_of_scope_entries() {
    let out = weightlab(&["trace"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let rows = v.as_array().unwrap();
    assert!(rows.iter().any(|r| r["verdict"] == "out-of-scope" && r["reason"].is_string()));
    assert!(rows.iter().filter(|r| r["in_scope"] == Value::Bool(true)).all(|r| !r["tests"].as_array().unwrap().is_empty()));
}

#[test]
fn suite_subset_reports_timings_outside_the_payload() {
    let out = weightlab(&["suite", "--seed", "5", "--only", "2"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["payload"]["criteria"].as_array().unwrap().len(), 1);
    assert!(v["payload"].get("timing").is_none());
    assert_eq!(v["timing"][0]["id"], 2);
}

#[test]
fn thread_cap_is_respected_and_checked() {
    let out = Command::new(env!("CARGO_BIN_EXE_weightlab"))
        .args(["suite", "--seed", "5", "--only", "2"])
        .env("WEIGHTLAB_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_weightlab"))
        .args(["trace"])
        .env("WEIGHTLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
