//! Seed derivation.
//!
//! All randomness in the crate flows from a single `u64` seed. Sub-streams
//! (per bootstrap replicate, per trial, centering pass, ...) are derived by
//! mixing the parent seed with a purpose label and an index, so results are
//! reproducible regardless of scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche, stable across platforms.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` for the given purpose label and index.
pub fn derive(seed: u64, label: &str, index: u64) -> u64 {
    let mut h = mix(seed);
    for b in label.as_bytes() {
        h = mix(h ^ u64::from(*b));
    }
    mix(h ^ index)
}

/// Deterministic generator for a derived stream.
pub fn stream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, label, index))
}
