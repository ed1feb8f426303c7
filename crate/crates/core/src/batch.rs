//! Fixed-size partitioning of point batches over a worker pool.
//!
//! Chunk boundaries depend only on the chunk size, never on the thread
//! count, so per-chunk results (and any counters summed over them) are the
//! same for every pool size.

use rayon::prelude::*;

use crate::geometry::Point;

pub const DEFAULT_CHUNK: usize = 1 << 20;

/// Runs `f` on consecutive `chunk`-sized slices of `points` using `threads`
/// workers and returns the per-chunk outputs in input order.
pub fn run_chunked<T, F>(points: &[Point], threads: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[Point]) -> T + Sync,
{
    let chunk = chunk.max(1);
    if threads <= 1 || points.len() <= chunk {
        return points.chunks(chunk).map(&f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("worker pool");
    pool.install(|| points.par_chunks(chunk).map(&f).collect())
}

/// Hardware parallelism, falling back to one.
pub fn available_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
