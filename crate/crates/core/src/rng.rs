//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by a
//! `(seed, stream)` pair. The generator state is a pure function of the key,
//! so a path (or a single step of a path) produces the same numbers no matter
//! which worker computes it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifier reserved for the Brownian increments of the limit scheme.
pub const BROWNIAN_STREAM: u64 = u64::MAX;

/// Address of one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub stream: u64,
}

impl StreamKey {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Builds the generator positioned at the start of this stream.
    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}
