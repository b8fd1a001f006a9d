//! Configuration-driven experiment runner behind the `opcalc` binary:
//! TOML configs in, JSON reports and CSV tables out.

pub mod batteries;
pub mod config;
pub mod error;
pub mod families;
pub mod report;

use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub use config::{Battery, ExperimentConfig, Format};
pub use error::{HarnessError, Result};
pub use families::list_families;
pub use report::{Check, Report, RunInfo, Table};

/// Runs the configured battery. The report's `passed` flag is the
/// conjunction of its checks.
pub fn run_suite(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let outcome = batteries::run(config)?;
    let run_info = RunInfo {
        started_unix_seconds: started,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        threads: opcalc::quadrature::thread_count(),
        version: env!("CARGO_PKG_VERSION"),
    };
    Ok(Report::new(config.clone(), outcome, run_info))
}
