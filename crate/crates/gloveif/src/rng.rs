//! Seed derivation so every stage draws from its own labeled substream of the
//! single run seed. Stages can then be rerun in isolation and still reproduce.

/// SplitMix64 step; stable across platforms and releases.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a substream seed from a base seed and a stage label.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h = splitmix64(base);
    for &b in label.as_bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    h
}

/// Derive a substream seed from a base seed, a stage label and an index
/// (epoch number, run number, ...).
pub fn derive_seed_indexed(base: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive_seed(base, label) ^ index)
}
