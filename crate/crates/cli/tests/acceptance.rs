//! Runs `weightlab suite --seed 42` twice and prints one line per criterion.
//!
//! Criteria 1 to 7 are read from the first run. Criterion 8 additionally needs
//! the two payloads to match byte for byte.

use std::io::Write;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

const SEED: &str = "42";

fn run_suite(out: &Path) -> Value {
    let status = Command::new(env!("CARGO_BIN_EXE_weightlab"))
        .args(["suite", "--seed", SEED, "--json"])
        .arg(out)
        .status()
        .expect("weightlab runs");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out).expect("report written")).expect("report is JSON");
    assert_eq!(status.success(), report["passed"].as_bool().unwrap(), "exit code follows the verdict");
    report
}

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_suite(&dir.path().join("first.json"));
    let second = run_suite(&dir.path().join("second.json"));
    let identical = serde_json::to_vec(&first["payload"]).unwrap() == serde_json::to_vec(&second["payload"]).unwrap();

    let criteria = first["payload"]["criteria"].as_array().unwrap();
    let timings = first["timing"].as_array().unwrap();
    assert_eq!(criteria.len(), 8);
    // Written to the stdout handle directly so libtest's capture does not hide it.
    let mut out = std::io::stdout().lock();
    let mut failures = Vec::new();
    for (c, t) in criteria.iter().zip(timings) {
        let id = c["id"].as_u64().unwrap();
        let checks = c["checks"].as_array().unwrap();
        let failed: Vec<&str> = checks.iter().filter(|k| !k["passed"].as_bool().unwrap()).map(|k| k["name"].as_str().unwrap()).collect();
        let within = t["within"].as_bool().unwrap();
        let mut passed = c["passed"].as_bool().unwrap() && within;
        if id == 8 {
            passed &= identical;
        }
        writeln!(
            out,
            "criterion {id}: {} | {} | {} instances, {} checks, {} failed | {:.1}s of {:.0}s{}",
            if passed { "PASS" } else { "FAIL" },
            c["title"].as_str().unwrap(),
            c["instances"],
            checks.len(),
            failed.len(),
            t["seconds"].as_f64().unwrap(),
            t["limit"].as_f64().unwrap(),
            if id == 8 { format!(" | payloads of two runs identical: {identical}") } else { String::new() },
        )
        .unwrap();
        for name in failed {
            writeln!(out, "    failed: {name}").unwrap();
        }
        if !passed {
            failures.push(id);
        }
    }
    assert!(failures.is_empty(), "criteria failed: {failures:?}");
}
