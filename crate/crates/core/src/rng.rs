//! Seed derivation. Every stochastic routine takes a `u64` seed; child seeds
//! are hashed from a parent so runs are reproducible and streams decorrelated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SolverRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SolverRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `(stream, index)` under `parent`.
pub fn derive_seed(parent: u64, stream: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(stream.wrapping_mul(0x632B_E59B_D9B4_E019) ^ splitmix64(index)))
}

/// Stable 64-bit hash of a string (FNV-1a), for seeding by name.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01B3)
    })
}
