//! Deterministic seed derivation.
//!
//! All randomness in the pipeline flows from a single master seed. Components
//! derive their own seeds with [`derive_seed`], a SplitMix64 mix of the parent
//! seed and a caller-chosen stream tag, so independent stages draw from
//! independent, reproducible streams regardless of evaluation order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function: decorrelates consecutive or structured inputs.
#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` for the stream identified by `tag`.
#[inline]
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    splitmix64(parent ^ splitmix64(tag))
}

/// Derives a child seed from `parent` and a multi-part stream identifier.
pub fn derive_seed_parts(parent: u64, parts: &[u64]) -> u64 {
    let mut seed = parent;
    for &p in parts {
        seed = derive_seed(seed, p);
    }
    seed
}

/// The RNG used throughout the crate, seeded from a derived `u64`.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
