//! Replicate fan-out over a rayon pool.
//!
//! Replicates are split into fixed-size chunks that do not depend on the
//! thread count, and each chunk draws from its own seeded streams, so the
//! summed worse-count is the same for any number of threads.

use std::ops::Range;

use geoscore_core::engine::{GeometricScorer, ScoreEstimate};
use rayon::prelude::*;

use crate::error::{InputError, Result};

pub const CHUNK: u64 = 4096;

fn chunks(n: u64) -> impl ParallelIterator<Item = Range<u64>> {
    let count = n.div_ceil(CHUNK);
    (0..count).into_par_iter().map(move |i| i * CHUNK..((i + 1) * CHUNK).min(n))
}

/// A pool with `threads` workers, or rayon's default size for `None`.
pub fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(InputError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    builder
        .build()
        .map_err(|e| InputError::Usage(format!("cannot start thread pool: {e}")))
}

pub fn count_worse(pool: &rayon::ThreadPool, scorer: &GeometricScorer<'_>, master_seed: u64, n: u64) -> u64 {
    pool.install(|| chunks(n).map(|r| scorer.count_worse(master_seed, r)).sum())
}

pub fn estimate(pool: &rayon::ThreadPool, scorer: &GeometricScorer<'_>, master_seed: u64, n: u64) -> ScoreEstimate {
    let worse = count_worse(pool, scorer, master_seed, n);
    scorer.estimate(worse, n, master_seed)
}
