//! Report envelope and trial tables.
//!
//! Everything numeric sits under `payload`; wall time is kept beside it so two
//! runs of the same config can be compared by their payload bytes.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;
use weightlab::extrapolate::{TrialRecord, TrialVerdict};

pub const TOOL: &str = "weightlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: Value,
    pub passed: bool,
    pub payload: Value,
    pub wall_time_ms: u128,
    /// Per-part timings, when the command has parts.
    #[serde(skip_serializing_if = "Value::is_null")]
    pub timing: Value,
}

impl Report {
    pub fn new(command: &str, config: impl Serialize, payload: impl Serialize, passed: bool, wall_time_ms: u128) -> anyhow::Result<Self> {
        Ok(Self {
            tool: TOOL,
            version: VERSION,
            command: command.into(),
            config: serde_json::to_value(config)?,
            passed,
            payload: serde_json::to_value(payload)?,
            wall_time_ms,
            timing: Value::Null,
        })
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn payload_bytes(&self) -> anyhow::Result<Vec<u8>> {
        Ok(serde_json::to_vec(&self.payload)?)
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";")
}

fn verdict_name(v: TrialVerdict) -> &'static str {
    match v {
        TrialVerdict::Pass => "pass",
        TrialVerdict::Fail => "fail",
        TrialVerdict::EnvelopeUndefined => "envelope-undefined",
    }
}

/// One row per trial.
pub fn write_trials_csv<W: Write>(out: W, trials: &[TrialRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "index",
        "verdict",
        "chain_ok",
        "target_ok",
        "base_ratio",
        "target_ratio",
        "target_lhs",
        "target_rhs",
        "phi_target",
        "base_char",
        "target_char",
        "c_used",
        "beta",
        "dual_functions",
        "failed_checks",
    ])?;
    for t in trials {
        let opt = |x: Option<f64>| x.map(|x| format!("{x:e}")).unwrap_or_default();
        let failed: Vec<&str> = t.failed_checks().map(|c| c.name.as_str()).collect();
        w.write_record([
            t.index.to_string(),
            verdict_name(t.verdict).to_string(),
            t.chain_ok.to_string(),
            t.target_ok.to_string(),
            format!("{:e}", t.base_ratio),
            format!("{:e}", t.target_ratio),
            format!("{:e}", t.target_lhs),
            opt(t.target_rhs),
            opt(t.phi_target),
            join(&t.base_char),
            join(&t.target_char),
            join(&t.c_used),
            format!("{:e}", t.constants.beta),
            t.dual_functions.to_string(),
            failed.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_file(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
