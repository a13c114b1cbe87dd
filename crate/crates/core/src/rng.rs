//! Seeded random streams.
//!
//! Every stochastic routine takes a `u64` seed and draws from a ChaCha8
//! generator. Independent streams are derived from one master seed with
//! [`substream`], so a tensor, a signal vector and a rounding draw built from
//! the same master seed never share random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of substream `index` of `seed`.
pub fn substream(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed) ^ mix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Stable seed for one trial of one grid cell.
pub fn trial_seed(master: u64, cell: u64, trial: u64) -> u64 {
    substream(substream(master, cell), trial)
}

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}
