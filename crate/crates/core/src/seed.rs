//! Deterministic seed derivation.
//!
//! Every stochastic component draws from a ChaCha stream whose seed is a
//! pure function of a base seed and a stream label, so runs replay
//! bit-identically regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Well-known stream labels, kept distinct so training and evaluation never
/// share randomness.
pub mod stream {
    pub const EPISODE: u64 = 0x45_50_49;
    pub const EVAL: u64 = 0x45_56_41_4c;
    pub const INIT: u64 = 0x49_4e_49_54;
    pub const SHUFFLE: u64 = 0x53_48_55_46;
    pub const NOISE: u64 = 0x4e_4f_49_53;
    pub const PARTNER: u64 = 0x50_41_52_54;
    pub const ATTACK: u64 = 0x41_54_54_4b;
    pub const CALIBRATE: u64 = 0x43_41_4c_49;
    pub const CANONICAL: u64 = 0x43_41_4e_4f;
    pub const BOOTSTRAP: u64 = 0x42_4f_4f_54;
    pub const PROBE: u64 = 0x50_52_4f_42;
    pub const DISCRIMINATOR: u64 = 0x44_49_53_43;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream label into a new seed.
pub fn derive(base: u64, label: u64) -> u64 {
    splitmix64(splitmix64(base) ^ label.rotate_left(17))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(base: u64, label: u64) -> Rng {
    rng(derive(base, label))
}
