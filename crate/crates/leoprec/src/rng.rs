//! Deterministic randomness: one documented seeding rule for the whole crate.
//!
//! Every generator takes a `u64` seed and is a pure function of it. Where a
//! task fans out over draws (dataset generation, Monte-Carlo rate samples,
//! batch shuffling), per-draw seeds are derived with [`child_seed`] so results
//! do not depend on evaluation order or worker count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Derives the seed for draw `index` under `base`.
///
/// SplitMix64 applied to `base + GOLDEN * (index + 1)`; the map is bijective
/// in `base` for fixed `index` and spreads consecutive indices far apart.
pub fn child_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The crate-wide RNG: ChaCha8, seeded deterministically.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal sample via Box-Muller.
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    // open interval keeps ln() finite
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Circularly-symmetric complex normal with unit variance (CN(0, 1)).
pub fn standard_complex(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(
        standard_normal(rng) / std::f64::consts::SQRT_2,
        standard_normal(rng) / std::f64::consts::SQRT_2,
    )
}
