//! Declarative experiment runner.

pub mod builtin;
pub mod config;
pub mod experiment;
pub mod suite;

use crate::error::Result;
use crate::exec;
use experiment::{ExperimentOutput, Resolved};

/// Environment variable capping how many experiments run at once.
pub const THREADS_ENV: &str = "ABQ_LAB_THREADS";

pub fn matrix_width() -> usize {
    let avail = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .map_or(avail, |n| n.min(avail.max(n)))
}

/// Executes independent experiments, at most `width` at a time; results keep
/// input order.
pub fn run_all(experiments: &[Resolved], width: usize) -> Vec<Result<ExperimentOutput>> {
    #[cfg(feature = "parallel")]
    if exec::mode() == exec::Mode::Parallel && width > 1 && experiments.len() > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(width).build() {
            return pool.install(|| exec::map_slice(experiments, experiment::execute));
        }
    }
    let _ = width;
    experiments.iter().map(experiment::execute).collect()
}
