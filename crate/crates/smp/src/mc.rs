//! Deterministic seeded parallel replicate loop.
//!
//! Each replicate derives its own RNG from the base seed and its index
//! through a splittable mixing function, so results are bit-identical for a
//! given seed no matter how many worker threads run, and replicates are
//! reduced in index order. `SMP_THREADS` caps the worker pool.

use std::sync::OnceLock;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use smp_core::risk::RiskEstimate;

use crate::{HarnessError, Result};

/// SplitMix64 finalizer over the base seed and a stream index.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Replicate RNG: ChaCha seeded from the derived stream seed.
pub fn replicate_rng(base: u64, index: usize) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(derive_seed(base, index as u64))
}

/// Builds the global worker pool once, honoring `SMP_THREADS`.
pub fn init_thread_pool() {
    static POOL: OnceLock<()> = OnceLock::new();
    POOL.get_or_init(|| {
        if let Ok(v) = std::env::var("SMP_THREADS") {
            if let Ok(threads) = v.trim().parse::<usize>() {
                if threads > 0 {
                    // Ignore failure: someone may have built the pool already.
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(threads)
                        .build_global();
                }
            }
        }
    });
}

/// Runs `replicates` independent replicates in parallel and returns the
/// per-replicate values in index order plus the failure count.
///
/// Fails with [`HarnessError::TooManyFailures`] when more than 1% of the
/// replicates error out, and with [`HarnessError::EmptyEstimate`] when none
/// were requested.
pub fn run_replicates<F>(replicates: usize, seed: u64, f: F) -> Result<(Vec<f64>, usize)>
where
    F: Fn(usize, &mut ChaCha8Rng) -> smp_core::Result<f64> + Sync,
{
    if replicates == 0 {
        return Err(HarnessError::EmptyEstimate);
    }
    init_thread_pool();
    let outcomes: Vec<smp_core::Result<f64>> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            f(i, &mut rng)
        })
        .collect();
    let mut values = Vec::with_capacity(replicates);
    let mut failures = 0usize;
    let mut first_failure = None;
    for outcome in outcomes {
        match outcome {
            Ok(v) => values.push(v),
            Err(e) => {
                failures += 1;
                first_failure.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if failures * 100 > replicates {
        return Err(HarnessError::TooManyFailures {
            failures,
            replicates,
            first: first_failure.unwrap_or_default(),
        });
    }
    Ok((values, failures))
}

/// Convenience wrapper: summarize replicate values into a [`RiskEstimate`].
pub fn estimate<F>(
    replicates: usize,
    seed: u64,
    bound: Option<f64>,
    f: F,
) -> Result<RiskEstimate>
where
    F: Fn(usize, &mut ChaCha8Rng) -> smp_core::Result<f64> + Sync,
{
    let (values, failures) = run_replicates(replicates, seed, f)?;
    Ok(RiskEstimate::from_values(&values, bound, failures)?)
}
