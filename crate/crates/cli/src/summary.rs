use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    /// Passes when `value ≤ tolerance`; NaN fails.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self::new(name, value <= tolerance, value, tolerance)
    }

    /// Passes when `value < tolerance`.
    pub fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Self::new(name, value < tolerance, value, tolerance)
    }

    /// Passes when `value ≥ tolerance`.
    pub fn at_least(name: &str, value: f64, tolerance: f64) -> Self {
        Self::new(name, value >= tolerance, value, tolerance)
    }

    pub fn new(name: &str, pass: bool, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            pass,
            value,
            tolerance,
        }
    }
}

/// Everything that varies between otherwise identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub timestamp_unix: u64,
    pub version: String,
}

impl Metadata {
    pub fn now() -> Self {
        Self {
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: String,
    pub problem_hash: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub metadata: Metadata,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}
