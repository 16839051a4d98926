//! Scenario catalog, configuration, runs and their on-disk artifacts.

pub mod config;
pub mod output;
pub mod report;
pub mod run;
pub mod scenario;

pub use config::{load_config, parse_config, ScenarioConfig};
pub use run::{run_scenario, RunOutput, RunRecord, RunStatus};

use crate::error::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERIFY_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

/// Environment variable capping the worker threads.
pub const WORKERS_ENV: &str = "AREAFLOW_WORKERS";

/// Exit code for an error that ended a command early.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::Validation { .. } | Error::Configuration(_) | Error::Io(_) | Error::Json(_) => EXIT_USAGE,
        Error::NotAreaDecreasing { .. } => EXIT_USAGE,
        _ => EXIT_ABORT,
    }
}

/// Sizes the global thread pool from `AREAFLOW_WORKERS` when set.
pub fn configure_workers() -> Result<(), String> {
    let Ok(v) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err(format!("{WORKERS_ENV} must be positive"));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    Ok(())
}
