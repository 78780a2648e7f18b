//! Derivation of independent RNG streams from a base seed.
//!
//! Every parallel unit of work (engine cell, Monte-Carlo trial, experiment
//! repetition) gets its own stream derived from the base seed and the unit's
//! coordinates, so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The deterministic generator used throughout the crate.
pub type Stream = ChaCha12Rng;

// splitmix64 finalizer; good avalanche for mixing coordinates into a seed.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a base seed with coordinate tags into a new seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut s = mix(base);
    for &t in tags {
        s = mix(s ^ mix(t));
    }
    s
}

/// A generator seeded from `base` and the given coordinates.
pub fn stream(base: u64, tags: &[u64]) -> Stream {
    Stream::seed_from_u64(derive_seed(base, tags))
}
