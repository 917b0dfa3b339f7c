//! Deterministic JSON run reports.
//!
//! Every subcommand that verifies something emits one [`Report`]: schema
//! version, tool version, digests of the input files, and a flat list of
//! named checks with pass/fail status and worst residuals. Two runs with the
//! same inputs and seed produce byte-identical reports; wall-clock timings
//! are opt-in precisely because they would break that.

use crate::tol::Tolerances;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

pub const SCHEMA: u32 = 1;

/// Resolved options shared by the verifying subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub tolerances: Tolerances,
    /// Manifold sample budget for membership and rank checks.
    pub samples: usize,
    /// Probe budget for overlap, collar and wall checks.
    pub probes: usize,
    /// Collar width override; `None` picks the safe default.
    pub delta: Option<f64>,
    pub out: Option<PathBuf>,
    /// Include per-check runtimes in the report, breaking byte determinism.
    pub timings: bool,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            tolerances: Tolerances::default(),
            samples: 1000,
            probes: 100,
            delta: None,
            out: None,
            timings: false,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub tool: String,
    pub command: String,
    pub status: &'static str,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    pub checks: Vec<Check>,
    /// Subcommand-specific payload (per-pair residuals, certificates, ...).
    /// A BTreeMap keeps key order, and with it byte determinism.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub data: BTreeMap<String, serde_json::Value>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Report {
        Report {
            schema: SCHEMA,
            tool: format!("quadratope {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            status: "pass",
            inputs: Vec::new(),
            seed,
            checks: Vec::new(),
            data: BTreeMap::new(),
        }
    }

    pub fn set_data(&mut self, key: &str, value: serde_json::Value) {
        self.data.insert(key.to_string(), value);
    }

    pub fn input(&mut self, path: &str, bytes: &[u8]) {
        self.inputs.push(InputDigest {
            path: path.to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn push(&mut self, name: &str, pass: bool, residual: Option<f64>, runtime_ms: Option<f64>) {
        if !pass {
            self.status = "fail";
        }
        self.checks.push(Check {
            name: name.to_string(),
            status: if pass { "pass" } else { "fail" },
            residual,
            runtime_ms,
        });
    }

    /// Run a check body, time it, and record the outcome. The body returns
    /// `(pass, residual)`; timing lands in the report only when enabled.
    pub fn timed<F>(&mut self, name: &str, timings: bool, body: F)
    where
        F: FnOnce() -> (bool, Option<f64>),
    {
        let start = Instant::now();
        let (pass, residual) = body();
        let elapsed = timings.then(|| start.elapsed().as_secs_f64() * 1e3);
        self.push(name, pass, residual, elapsed);
    }

    pub fn passed(&self) -> bool {
        self.status == "pass"
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
