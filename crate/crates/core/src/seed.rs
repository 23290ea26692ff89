//! Seed derivation. Every random stream in the workbench is keyed by
//! (master seed, purpose tag, index) so that results never depend on
//! execution order or thread scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche, cheap, stable.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed, a stream tag and an index.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    mix(mix(master ^ tag).wrapping_add(index))
}

/// Construct the deterministic RNG used throughout the crate.
pub fn rng_from(master: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, index))
}

/// Stream tags. Keeping them in one place avoids accidental collisions.
pub mod tags {
    pub const IC_PARAMS: u64 = 0x4943_5041;
    pub const MODEL_INIT: u64 = 0x4d4f_4449;
    pub const PF_DELTA: u64 = 0x5046_4454;
    pub const SPF_ACQUIRE: u64 = 0x5350_4143;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const REDUCER: u64 = 0x5245_4455;
}
