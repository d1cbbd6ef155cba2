//! Seeded random streams.
//!
//! Every sampler instance, Monte-Carlo chunk and training component draws
//! from its own ChaCha stream keyed by `(seed, stream)`, so results do not
//! depend on which thread ran which instance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Streams reserved for non-sampler consumers, kept far away from the
/// instance indices used by samplers.
pub(crate) mod streams {
    pub const INIT: u64 = u64::MAX;
    pub const DROPOUT: u64 = u64::MAX - 1;
    pub const GENERATOR: u64 = u64::MAX - 2;
    pub const SPLIT: u64 = u64::MAX - 3;
    pub const FEATURES: u64 = u64::MAX - 4;
    pub const MONTE_CARLO: u64 = 1 << 62;
}
