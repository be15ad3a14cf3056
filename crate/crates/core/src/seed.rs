//! Deterministic seed derivation.
//!
//! Every stochastic component derives its stream from a master seed and a
//! position (replication index, record index, ...), never from the order in
//! which work is scheduled.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for position `index` under `parent`.
#[inline]
pub fn child_seed(parent: u64, index: u64) -> u64 {
    mix64(parent ^ mix64(index.wrapping_add(1).wrapping_mul(GAMMA)))
}

/// Child seed keyed by a domain tag, then by an index.
pub fn tagged_seed(parent: u64, tag: &str, index: u64) -> u64 {
    let tag_hash = tag
        .bytes()
        .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x1000_0000_01B3));
    child_seed(child_seed(parent, tag_hash), index)
}

/// Uniform draw in `[0, 1)` at `position` of the SplitMix64 stream keyed
/// by `key`.
#[inline]
pub fn uniform_at(key: u64, position: u64) -> f64 {
    let z = mix64(key.wrapping_add(position.wrapping_add(1).wrapping_mul(GAMMA)));
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seed for a set of nodes (order-insensitive once the slice is sorted).
pub fn set_seed(parent: u64, sorted_nodes: &[usize]) -> u64 {
    sorted_nodes
        .iter()
        .fold(child_seed(parent, sorted_nodes.len() as u64), |h, &v| {
            child_seed(h, v as u64)
        })
}
