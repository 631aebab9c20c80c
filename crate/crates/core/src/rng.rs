//! Seed derivation for the many independent sketch instances of a feature map.
//!
//! Every sketch is keyed by the user seed plus a component path. The path is
//! folded into a ChaCha stream id, so two components never share keystream
//! and a component's randomness does not depend on construction order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A node in the seed tree: `(seed, component path)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    seed: u64,
    path: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, path: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives the stream of sub-component `id`.
    pub fn child(&self, id: u64) -> Self {
        Self {
            seed: self.seed,
            path: splitmix64(self.path ^ splitmix64(id.wrapping_add(0xA076_1D64_78BD_642F))),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.path);
        rng
    }
}
