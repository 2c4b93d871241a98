//! Seeded random streams.
//!
//! Every stochastic step draws from a ChaCha8 stream selected by a
//! `(seed, stream)` pair so that independent consumers never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream used for data generation.
pub const STREAM_DATA: u64 = 0;
/// Stream used for the integration sample.
pub const STREAM_MEASURE: u64 = 1;
/// Stream used for fold assignment.
pub const STREAM_FOLDS: u64 = 2;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of replication `r` of a study started from `base`.
pub fn replication_seed(base: u64, r: u64) -> u64 {
    base ^ r
}
