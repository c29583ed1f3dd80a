//! Config-driven experiment runner on top of `relulab`.
//!
//! A run reads one JSON config, dispatches on its mode, writes CSV/JSON artifacts into the
//! output directory and finishes with `summary.json`. Artifacts depend only on the config
//! and seed; the wall-clock timestamp lives in the summary's `metadata` block.

pub mod config;
pub mod error;
pub mod modes;
pub mod plotdata;
pub mod summary;

use std::fs;

pub use config::{load_config, parse_config, ExperimentConfig, ModeConfig, ModeName};
pub use error::{CliError, Result};
pub use plotdata::{emit_plotdata, write_plotdata};
pub use summary::{Check, Metadata, Summary};

pub const SUMMARY_FILE: &str = "summary.json";

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "RELULAB_THREADS";

/// Runs the experiment and writes its artifacts plus `summary.json` into `cfg.out_dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<Summary> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::io(&cfg.out_dir, e))?;
    let mut artifacts = modes::Artifacts::new(&cfg.out_dir);
    let checks = modes::dispatch(cfg, &mut artifacts)?;
    let summary = Summary {
        mode: cfg.mode_name.as_str().to_string(),
        problem_hash: cfg.problem_hash(),
        seed: cfg.seed,
        checks,
        artifacts: artifacts.into_names(),
        metadata: Metadata::now(),
    };
    let path = cfg.out_dir.join(SUMMARY_FILE);
    let mut bytes = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(|e| CliError::io(path, e))?;
    Ok(summary)
}

/// Reads the thread cap from the environment; `None` when unset.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::config(THREADS_ENV, format!("expected a positive integer, got {v:?}"))),
        },
    }
}
