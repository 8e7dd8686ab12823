//! Seeded random streams.
//!
//! Every parallel unit of work (a simulation replicate, a batch of
//! permutations) draws from its own ChaCha8 stream selected by
//! `(seed, index)`, so results do not depend on how work is split across
//! threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator for work unit `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
