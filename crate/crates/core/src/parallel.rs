//! Optional data parallelism with order-preserving results.
//!
//! `NODETRANS_THREADS` sets the worker count; unset or `1` runs everything on
//! the calling thread. Callers reduce the returned vectors sequentially, so
//! results do not depend on the worker count.

use std::sync::OnceLock;

use rayon::prelude::*;

pub const THREADS_ENV: &str = "NODETRANS_THREADS";

fn pool() -> Option<&'static rayon::ThreadPool> {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(1);
        if threads <= 1 {
            return None;
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| log::warn!("falling back to one thread: {e}"))
            .ok()
    })
    .as_ref()
}

/// `(0..n).map(f)`, possibly on worker threads, in index order.
pub fn map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match pool() {
        Some(p) => p.install(|| (0..n).into_par_iter().map(f).collect()),
        None => (0..n).map(f).collect(),
    }
}
