//! Stable seed derivation.
//!
//! Every random stream in the crate is derived from a master seed and a
//! tuple of integers, so results do not depend on iteration or thread order.

/// One round of SplitMix64.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and a path of integer labels.
pub fn derive(parent: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(parent), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Hashes a string label into a seed component.
pub fn label(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}
