//! Seed derivation for independent random streams.

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `tag` of the generator rooted at `base`.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    mix64(mix64(base) ^ tag)
}

/// Seed for item `index` of stream `tag`.
pub fn derive_seed2(base: u64, tag: u64, index: u64) -> u64 {
    derive_seed(derive_seed(base, tag), index)
}
