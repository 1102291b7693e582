//! Seeded randomness.
//!
//! Every random choice in the crate is drawn from a PCG-XSL-RR 128/64
//! generator (`rand_pcg::Pcg64`) seeded through [`generator`]. Independent
//! streams for sub-tasks (sites, blocks, restarts) are derived with the
//! SplitMix64 finalizer so a single user seed fixes every output bit.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

pub type Generator = Pcg64;

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for sub-stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream.wrapping_add(1)))
}

pub fn generator(seed: u64) -> Generator {
    Pcg64::seed_from_u64(seed)
}

/// Uniform draw in `[0, 1)` with 53 random bits.
pub fn unit(rng: &mut Generator) -> f64 {
    (rng.random::<u64>() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Discrete inverse-CDF sampler over nonnegative masses.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    cumulative: Vec<f64>,
}

impl InverseCdf {
    /// Returns `None` when the total mass is zero or not finite.
    pub fn new(masses: &[f64]) -> Option<Self> {
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for &m in masses {
            acc += m.max(0.0);
            cumulative.push(acc);
        }
        if acc.is_nan() || acc <= 0.0 || acc.is_infinite() {
            return None;
        }
        Some(Self { cumulative })
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Smallest index whose cumulative mass exceeds `u * total`.
    pub fn sample(&self, rng: &mut Generator) -> usize {
        let target = unit(rng) * self.total();
        let idx = self.cumulative.partition_point(|&c| c <= target);
        idx.min(self.cumulative.len() - 1)
    }
}
