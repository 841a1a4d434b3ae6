//! Parallel helpers whose results do not depend on the thread count: work is
//! split into fixed pieces and partial results are combined in index order.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{LabError, Result};

/// Chunk length for [`chunked_sum`]; fixed so that the summation tree never
/// depends on the pool size.
pub const CHUNK: usize = 2048;

/// Runs `f` on a pool of `threads` workers (default: available parallelism).
pub fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    let pool = b.build().map_err(|e| LabError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Order-preserving parallel map.
pub fn map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().map(f).collect()
}

/// Order-preserving parallel map over `0..n`.
pub fn map_range<R: Send>(n: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    (0..n).into_par_iter().map(f).collect()
}

/// `sum_i f(i)` for vector-valued terms: `fill(range, acc)` adds the terms of
/// one chunk into a zeroed `acc` of length `width`; chunk totals are added in
/// chunk order.
pub fn chunked_sum(n: usize, width: usize, fill: impl Fn(Range<usize>, &mut [f64]) + Sync + Send) -> Vec<f64> {
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; width];
            fill(c * CHUNK..((c + 1) * CHUNK).min(n), &mut acc);
            acc
        })
        .collect();
    let mut total = vec![0.0; width];
    for p in parts {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}
