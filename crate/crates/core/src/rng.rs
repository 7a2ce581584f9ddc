//! Seed derivation.
//!
//! Every random decision in the crate is drawn from a `ChaCha8Rng` whose seed
//! is derived from a parent seed and a stream index with [`derive_seed`].
//! ChaCha output is specified bit-for-bit, so a model trained from the same
//! seed is identical on every platform and under any thread schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `stream` of `seed`:
/// `mix64(seed ^ mix64(stream + GOLDEN_GAMMA))`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream.wrapping_add(GOLDEN_GAMMA)))
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Named streams so unrelated consumers of one parent seed never collide.
pub(crate) mod stream {
    pub const BOOTSTRAP: u64 = 0xB007;
    pub const FOLDS: u64 = 0xF01D;
    pub const FOLD_MODEL: u64 = 0xF0_0000;
    pub const SPLIT: u64 = 0x5B17;
    pub const GRAIN: u64 = 0x6A_0000;
    pub const LEVEL: u64 = 0x1E_0000;
    pub const FOREST: u64 = 0xF0E5_0000;
    pub const SUBSAMPLE: u64 = 0x5AB5;
    pub const CASCADE: u64 = 0xCA5C;
}
