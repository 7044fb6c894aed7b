//! The report envelope every command-line run emits: a versioned JSON
//! document carrying the configuration echo, the master seed, the
//! experiment-specific results object, and the wall-clock runtime. The
//! config echo is complete by design -- feeding it back reproduces the run
//! bit for bit.

use serde::{Deserialize, Serialize};

/// Bumped whenever the shape of the envelope or of any results object
/// changes incompatibly.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: serde_json::Value,
    pub seed: u64,
    pub results: serde_json::Value,
    pub runtime_seconds: f64,
}

impl Report {
    pub fn new(config: serde_json::Value, seed: u64, results: serde_json::Value) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            config,
            seed,
            results,
            runtime_seconds: 0.0,
        }
    }

    pub fn with_runtime(mut self, seconds: f64) -> Self {
        self.runtime_seconds = seconds;
        self
    }

    pub fn to_json_pretty(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

/// One row of the flat CSV view of a report: a grid coordinate, the value
/// estimated there, and (where defined) its standard error and the count
/// behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub x: f64,
    pub value: f64,
    pub stderr: Option<f64>,
    pub count: Option<u64>,
}
