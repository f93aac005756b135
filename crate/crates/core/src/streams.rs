//! Reproducible random streams for parallel Monte Carlo.
//!
//! Each task gets its own generator seeded from a 64-bit mix of the
//! experiment seed and the task index, so results depend only on
//! `(seed, index)` and never on how tasks are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{Error, Result};

pub type Stream = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The 64-bit seed of task `index` under experiment seed `seed`.
pub fn stream_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn derive_stream(seed: u64, index: u64) -> Stream {
    Stream::seed_from_u64(stream_seed(seed, index))
}

/// Runs `task(index, stream)` for every index in `0..count` on a pool of
/// `workers` threads and returns the results in index order.
pub fn run_indexed<T, F>(workers: usize, seed: u64, count: usize, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut Stream) -> T + Sync + Send,
{
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    let run = || {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let mut rng = derive_stream(seed, i as u64);
                task(i, &mut rng)
            })
            .collect::<Vec<T>>()
    };
    if workers == 1 {
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let mut rng = derive_stream(seed, i as u64);
            out.push(task(i, &mut rng));
        }
        return Ok(out);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(run))
}
