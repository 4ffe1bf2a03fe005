//! Counter-based randomness.
//!
//! Every random quantity in a campaign is derived from the config seed and a
//! tuple of integers through the splitmix64 finalizer, so results do not depend
//! on platform RNGs or on the order in which streams are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_EVOLVE: u64 = 0x45564f4c;
pub const TAG_MODEL: u64 = 0x4d4f4445;
pub const TAG_MEMBER: u64 = 0x4d454d42;
pub const TAG_BOOTSTRAP: u64 = 0x424f4f54;
pub const TAG_TRAIN: u64 = 0x54524149;

/// The splitmix64 output function.
#[inline]
pub const fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a seed together with a tuple of integers.
#[inline]
pub fn mix(seed: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for (i, &p) in parts.iter().enumerate() {
        h = splitmix64(h ^ p.wrapping_mul(0x2545_f491_4f6c_dd1d).wrapping_add(i as u64));
    }
    h
}

/// Map a hash to `[0, 1)` using its top 53 bits.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Map a hash to a uniform value with zero mean and unit variance.
#[inline]
pub fn centered_unit(h: u64) -> f64 {
    (2.0 * unit_f64(h) - 1.0) * 3f64.sqrt()
}

/// A seeded stream for code that needs a conventional RNG.
pub fn stream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, parts))
}
