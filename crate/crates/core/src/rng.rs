//! Seed derivation.
//!
//! Every random quantity is drawn from a ChaCha stream keyed by
//! `(seed, label, index)`, so any sub-computation can be replayed in
//! isolation and parallel trials never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn label_hash(label: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive a child seed from a parent seed, a stream label and an index.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ label_hash(label)).wrapping_add(splitmix64(index)))
}

pub fn stream(seed: u64, label: &str) -> SimRng {
    substream(seed, label, 0)
}

pub fn substream(seed: u64, label: &str, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, label, index))
}

/// A fair coin that depends only on `(key, index)`; used for per-node tie
/// breaks so that an estimator's coins do not depend on visiting order.
pub fn hash_coin(key: u64, index: u64) -> bool {
    splitmix64(key ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019))) >> 63 == 1
}

/// Uniform double in [0, 1) from `(key, index)`.
pub fn hash_unit(key: u64, index: u64) -> f64 {
    let bits = splitmix64(key ^ splitmix64(index.wrapping_add(0x8cb9_2ba7_2f3d_8dd7)));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
