//! Seeded random streams.
//!
//! Every stochastic routine takes a `(seed, stream)` pair. The generator is
//! ChaCha8 keyed by `seed` with the 64-bit stream id set to `stream`, so
//! replicate `k` of a study always sees the same numbers no matter which
//! thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type FouRng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> FouRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
