//! Seeded, platform-independent randomness.
//!
//! All randomness flows through ChaCha8 keyed by a [`Seed`]. Independent
//! consumers of the same seed draw from distinct ChaCha streams so that
//! adding a consumer never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn value(self) -> u64 {
        self.0
    }

    /// Generator for one named consumer of this seed.
    pub fn rng(self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }
}

impl From<u64> for Seed {
    fn from(value: u64) -> Self {
        Seed(value)
    }
}

impl std::fmt::Display for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

// Stream identifiers. Kept in one place so no two consumers collide.
pub(crate) const STREAM_SPLIT: u64 = 1;
pub(crate) const STREAM_SUBSAMPLE: u64 = 2;
pub(crate) const STREAM_FOLDS: u64 = 3;
pub(crate) const STREAM_RANDOM_DIMS: u64 = 4;
pub(crate) const STREAM_CENTROIDS: u64 = 16;
pub(crate) const STREAM_ROTATION: u64 = 17;
pub(crate) const STREAM_SHIFT: u64 = 18;
pub(crate) const STREAM_SUBSPACE: u64 = 19;
/// Row noise; the draw index is packed into the high bits.
pub(crate) const STREAM_NOISE: u64 = 32;
pub(crate) const STREAM_NOISE_AMPLIFIED: u64 = 33;
