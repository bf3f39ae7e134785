//! Seeded random streams.
//!
//! Every stochastic routine draws from a [`SimRng`]. Independent replicates,
//! sweep cells and chain-estimation episodes get their own stream of the same
//! master seed, so results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream `stream` of the generator keyed by `seed`. Stream 0 is what a plain
/// single run with that seed uses.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream namespace for chain-estimation episodes, disjoint from replicate
/// streams (which are small integers).
pub fn episode_stream(row: usize, episode: u64) -> u64 {
    (1u64 << 63) | ((row as u64) << 40) | episode
}
