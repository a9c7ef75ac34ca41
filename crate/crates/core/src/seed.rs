//! Stable sub-seed derivation.
//!
//! `derive(seed, tag)` runs 64-bit FNV-1a over the little-endian bytes of
//! `seed` followed by the UTF-8 bytes of `tag`, then applies the
//! SplitMix64 finaliser. The function is fixed; changing it changes every
//! generated scenario.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub const TASKS: &str = "tasks";
pub const DELAYS: &str = "delays";
pub const ALGO: &str = "algo";

pub fn derive(seed: u64, tag: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(tag.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The RNG used everywhere a seeded stream is needed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
