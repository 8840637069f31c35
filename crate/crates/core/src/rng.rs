//! Seed derivation shared by every stochastic component.
//!
//! All randomness flows from a single master seed. Independent work items
//! (permutation iterations, synthetic days, importance repeats) get their
//! own generator keyed by an index, so results do not depend on which
//! thread runs which item or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for item `index` of the stream identified by `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master) ^ mix64(index.wrapping_add(0xA076_1D64_78BD_642F)))
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived(master: u64, index: u64) -> ChaCha8Rng {
    seeded(derive_seed(master, index))
}
