//! Worker pools. Every parallel loop writes disjoint outputs and reduces only
//! with `max`, so results do not depend on the number of workers.

use crate::error::{Error, Result};

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn run<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {workers} workers: {e}")))?;
    pool.install(f)
}
