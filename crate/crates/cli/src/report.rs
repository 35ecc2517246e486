use std::process::ExitCode;
use std::time::Duration;

use handlebody::ToleranceConfig;
use serde::Serialize;
use serde_json::Value;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// What a command produced, before timing and bookkeeping are attached.
pub struct Outcome {
    pub inputs: Value,
    pub outputs: Value,
    /// Names of failed checks; empty when everything passed.
    pub failures: Vec<String>,
    /// Whether `--out` was consumed by a command artifact.
    pub out_used: bool,
}

#[derive(Serialize)]
pub struct Timing {
    pub elapsed_ms: f64,
}

#[derive(Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: Vec<String>,
    pub seed: u64,
    pub tolerances: ToleranceConfig,
    pub inputs: Value,
    pub outputs: Value,
    pub status: &'static str,
    pub failures: Vec<String>,
    pub timing: Timing,
}

impl RunReport {
    pub fn new(
        command: Vec<String>,
        seed: u64,
        tolerances: ToleranceConfig,
        o: Outcome,
        elapsed: Duration,
    ) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            command,
            seed,
            tolerances,
            inputs: o.inputs,
            outputs: o.outputs,
            status: if o.failures.is_empty() {
                "pass"
            } else {
                "fail"
            },
            failures: o.failures,
            timing: Timing {
                elapsed_ms: elapsed.as_secs_f64() * 1e3,
            },
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        if self.failures.is_empty() {
            ExitCode::SUCCESS
        } else {
            for f in &self.failures {
                eprintln!("check failed: {f}");
            }
            ExitCode::from(1)
        }
    }
}
