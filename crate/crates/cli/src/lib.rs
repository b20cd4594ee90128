//! Experiment harness around `dyadlab-core`: configuration, fixed suites,
//! calibrated constants and the `dyadlab` subcommands.

pub mod calibration;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod suites;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};

/// Sizes the global rayon pool from `DYADLAB_WORKERS` when set.
pub fn init_workers() -> Result<()> {
    if let Ok(v) = std::env::var(commands::WORKERS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| HarnessError::Usage(format!("{}={v:?} is not a worker count", commands::WORKERS_ENV)))?;
        // A pool that already exists keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
