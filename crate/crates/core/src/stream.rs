//! Deterministic per-trial random streams.
//!
//! Every trial gets its own ChaCha stream derived from the base seed and a
//! counter mixed through splitmix64, so trial-level parallelism can never
//! reorder randomness and a `(seed, cell, trial)` triple always replays the
//! same run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer, the usual constants.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Collapses a label sequence into one stream id.
pub fn derive_stream(parts: &[u64]) -> u64 {
    let mut acc = 0x243f6a8885a308d3u64; // arbitrary non-zero start
    for &p in parts {
        acc = splitmix64(acc ^ splitmix64(p));
    }
    acc
}

/// Independent generator for one trial: fixed base seed, per-trial stream.
pub fn trial_rng(base_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(stream);
    rng
}
