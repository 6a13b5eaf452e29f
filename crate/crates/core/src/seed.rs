//! Labeled child-seed derivation so a single run seed drives every RNG.

/// Derives a child seed from `seed` and a label. Stable across platforms and releases.
pub fn child_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, folded into the parent seed, then SplitMix64 finalization.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ h.rotate_left(17))
}

/// Derives a child seed from `seed` and an index path, e.g. `(epoch, batch, item)`.
pub fn indexed_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &i| splitmix64(acc ^ i.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
