//! Seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent deterministic stream `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// Stream identifiers, kept distinct so components never share randomness.
pub(crate) const TOPOLOGY: u64 = 1;
pub(crate) const DATA: u64 = 2;
pub(crate) const SPLIT: u64 = 3;
pub(crate) const MAPS: u64 = 4;
pub(crate) const BATCH: u64 = 5;
pub(crate) const REPAIR: u64 = 6;
