//! Counter-based randomness keyed by lattice points.
//!
//! Every draw is a pure function of `(seed, tag, coordinates, counter)`, so a
//! field is reproducible no matter which order (or thread) visits the sites.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one key.
#[inline]
pub fn key(seed: u64, tag: u64, words: &[i64]) -> u64 {
    let mut h = mix64(seed ^ mix64(tag.wrapping_add(GOLDEN)));
    for &w in words {
        h = mix64(h.wrapping_add(GOLDEN) ^ (w as u64));
    }
    h
}

/// Uniform in the open interval (0, 1) from a 64-bit word.
#[inline]
pub fn unit_open(h: u64) -> f64 {
    ((h >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// The `i`-th uniform of the stream identified by `k`.
#[inline]
pub fn uniform_at(k: u64, i: u64) -> f64 {
    unit_open(mix64(k ^ mix64(i.wrapping_add(1).wrapping_mul(GOLDEN))))
}

/// Stream tags. Distinct tags keep draws for different purposes independent.
pub mod tag {
    pub const STEP: u64 = 1;
    pub const SIGN: u64 = 2;
    pub const REPLICA: u64 = 3;
    pub const SYNTH: u64 = 4;
    pub const QMC: u64 = 5;
}

/// Seed for replica `r` of experiment stage `stage`.
pub fn replica_seed(master: u64, stage: u64, r: u64) -> u64 {
    key(master, tag::REPLICA, &[stage as i64, r as i64])
}

/// A sequential generator for bulk draws, seeded from a derived key.
pub fn chacha(k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(k)
}
