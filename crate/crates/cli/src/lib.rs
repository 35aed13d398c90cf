//! Batch front end for `offdiag-core`: JSON run configurations, analyses,
//! one-parameter sweeps, reports and plot-ready tables.

pub mod acceptance;
pub mod analyze;
pub mod checks;
pub mod config;
pub mod error;
pub mod report;
pub mod sweep;

pub use analyze::{analyze, Analysis};
pub use config::RunConfig;
pub use error::{ErrorKind, RunError};
pub use report::{Report, Table, Timing};
pub use sweep::{run_sweep, Grid, SweepRow};

/// Runs `f` on a pool of `workers` threads (default: available parallelism).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(RunError::config("--workers", "", "must be at least 1"));
        }
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| RunError::internal("", "", format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
