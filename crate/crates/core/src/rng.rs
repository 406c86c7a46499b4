//! Seeded random streams.
//!
//! Every stochastic computation takes an explicit [`RandomStream`]. Parallel
//! work splits a master seed by index: item `i` of a batch uses the ChaCha
//! stream `i` keyed by the master seed, so results do not depend on how the
//! work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RandomStream = ChaCha8Rng;

/// Stream for the master seed itself (stream index 0).
pub fn from_seed(seed: u64) -> RandomStream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` derived from `seed`.
pub fn substream(seed: u64, index: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
