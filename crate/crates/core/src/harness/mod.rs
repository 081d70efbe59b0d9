//! Verification suites, run configuration and reports.

mod config;
mod report;
mod suites;

use std::time::Instant;

use rayon::prelude::*;

pub use config::{OutputPaths, RunConfig, Tolerances, UdsParams, SCHEMA_VERSION, SUITES};
pub use report::{emit_report, Report, Series, SuiteResult};
pub use suites::run_suite;

use crate::error::{Error, Result};

/// Runs the named suites (all registered suites when empty) on at most
/// `cfg.jobs` threads; results come back in request order with wall times.
pub fn run_all(cfg: &RunConfig, names: &[String]) -> Result<Vec<SuiteResult>> {
    cfg.validate()?;
    let names: Vec<String> = if names.is_empty() {
        SUITES.iter().map(|(s, _)| s.to_string()).collect()
    } else {
        names.to_vec()
    };
    if let Some(bad) = names.iter().find(|n| !SUITES.iter().any(|(s, _)| s == n)) {
        return Err(Error::UnknownSuite(bad.clone()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        names
            .par_iter()
            .map(|name| {
                let start = Instant::now();
                let mut result = run_suite(name, cfg)?;
                result.wall_time = Some(start.elapsed().as_secs_f64());
                Ok(result)
            })
            .collect()
    })
}
