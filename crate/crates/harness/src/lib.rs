//! Seeded experiment runner behind the `occam-icl` binary.
//!
//! Every experiment turns an [`ExperimentConfig`] into a [`Report`]: a config
//! echo, per-trial tables, summary tables and flat aggregates. Trial `i` of a
//! group always draws from its own random stream, so results do not depend on
//! the number of worker threads.

pub mod config;
mod experiments;
pub mod report;

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

pub use config::{Experiment, ExperimentConfig, Params};
pub use report::{Cell, Report, Table};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: occam_core::Error,
    },
    #[error(transparent)]
    Core(#[from] occam_core::Error),
    #[error(transparent)]
    Probe(#[from] occam_probe::ProbeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Random stream for trial `trial` of group `group`.
pub(crate) fn stream(group: u64, trial: usize) -> u64 {
    (group << 32) | trial as u64
}

/// Runs `f` over `0..n` on the worker pool; output is in trial order.
pub(crate) fn par_trials<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> occam_core::Result<T> + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| f(i).map_err(|source| HarnessError::Trial { trial: i, source }))
        .collect()
}

pub(crate) struct Output {
    pub tables: Vec<(&'static str, Table)>,
    pub aggregates: report::Aggregates,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let start = Instant::now();
    let out = experiments::dispatch(cfg)?;
    Ok(Report {
        experiment: cfg.experiment.name().to_string(),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.to_json(),
        tables: out.tables.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        aggregates: out.aggregates.into_inner(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}
