//! Replica seed derivation.
//!
//! Replica `i` of an experiment with master seed `m` runs with
//! `replica_seed(m, i)`, the `(i+1)`-th output of a SplitMix64 generator
//! whose state starts at `m`:
//!
//! ```text
//! z = m + (i + 1) * 0x9E3779B97F4A7C15            (wrapping)
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! seed = z ^ (z >> 31)
//! ```
//!
//! This derivation is part of the experiment file format and must not change.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn replica_seed(master: u64, replica: u64) -> u64 {
    splitmix64_mix(master.wrapping_add(replica.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// The generator every simulation in this crate draws from.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
