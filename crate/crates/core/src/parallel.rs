//! Ordered fan-out over independent work items.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Evaluate `f(0..count)` on `threads` workers and return results in index order.
///
/// Each item is computed by a single thread, so the output does not depend on
/// the thread count.
pub fn map_indexed<T, F>(count: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if threads <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(&f).collect())
}
