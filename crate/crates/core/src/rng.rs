//! Seeding and Gaussian sampling.
//!
//! Every random quantity in the crate is drawn from a [`ChaCha8Rng`] seeded
//! with a 64-bit integer, so results replay bit-exactly for a given seed on
//! any platform. Normal variates use the Ziggurat sampler from `rand_distr`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed of the `index`-th independent stream under `master`:
/// `master XOR (index * 0x9E3779B97F4A7C15)` with wrapping multiplication.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    master ^ index.wrapping_mul(GOLDEN_GAMMA)
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One draw of a zero-mean circular complex Gaussian with the given variance.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// `n` i.i.d. CN(0, 1) samples.
pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| complex_gaussian(rng, 1.0)).collect()
}
