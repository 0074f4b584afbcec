//! Per-sample random streams.
//!
//! Sample `i` of a run with seed `s` always draws from ChaCha8 keyed by `s`
//! on stream `i`, so a parallel fan-out gives the same numbers as a serial
//! loop regardless of how samples land on workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Default seed used by the CLI and the verification suites.
pub const DEFAULT_SEED: u64 = 0x5E_EDC0_1107;

pub type SampleRng = ChaCha8Rng;

/// Generator for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Maps `f` over sample indices `0..count`, each with its own stream, on a
/// pool of `threads` workers. Output is in index order.
pub fn parallel_samples<T, F>(seed: u64, count: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut SampleRng) -> T + Sync + Send,
{
    let run = |i: usize| {
        let mut rng = sample_rng(seed, i as u64);
        f(i as u64, &mut rng)
    };
    if threads <= 1 {
        return (0..count).map(run).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(run).collect()),
        Err(_) => (0..count).map(run).collect(),
    }
}
