//! Counter-based substream derivation.
//!
//! All randomness flows from an [`RngStream`]: a root seed plus a derivation
//! path folded into the 64-bit stream id of a ChaCha generator. A child
//! stream depends only on the parent and the tag, never on draw order, so
//! replications can run on any number of workers and still reproduce the
//! single-threaded results bit-for-bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Reproducibility token: `(seed, derivation path)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    path: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn root(seed: u64) -> Self {
        RngStream { seed, path: 0 }
    }

    /// Derive an independent substream. Children with distinct tags are
    /// statistically independent; the same `(seed, path, tag)` always yields
    /// the same child.
    #[must_use]
    pub fn child(self, tag: u64) -> Self {
        RngStream {
            seed: self.seed,
            path: splitmix64(self.path ^ splitmix64(tag)),
        }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.path);
        rng
    }

    pub fn seed(self) -> u64 {
        self.seed
    }
}

/// Fixed purpose tags so call sites do not collide by accident.
pub mod tag {
    pub const REPLICATION: u64 = 0x01;
    pub const MOMENTS: u64 = 0x02;
    pub const TAIL: u64 = 0x03;
    pub const ENSEMBLE: u64 = 0x04;
    pub const PROBE: u64 = 0x05;
    pub const PATH: u64 = 0x06;
    pub const CENTERING: u64 = 0x07;
    pub const SIGMA: u64 = 0x08;
    pub const LEVEL: u64 = 0x09;
    pub const LAG: u64 = 0x0a;
    pub const POSITION: u64 = 0x0b;
    pub const BOUND: u64 = 0x0c;
}
