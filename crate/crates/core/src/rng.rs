//! Seeded random streams for reproducible Monte Carlo runs.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::TAU;

/// Deterministic random stream. Identical seeds give identical sequences.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a list of indices (trial, scheme, ...) into a sub-seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &idx| splitmix64(acc ^ splitmix64(idx)))
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent stream for the work item identified by `path`.
    pub fn derived(master: u64, path: &[u64]) -> Self {
        Self::new(derive_seed(master, path))
    }

    /// Circularly-symmetric complex Gaussian with unit power.
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let re: f64 = self.inner.sample(StandardNormal);
        let im: f64 = self.inner.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    /// Complex Gaussian with `E|z|^2 = power`.
    pub fn complex_noise(&mut self, power: f64) -> Complex64 {
        if power == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.complex_gaussian() * power.sqrt()
    }

    /// Phase drawn uniformly from `[0, 2pi)`.
    pub fn uniform_phase(&mut self) -> f64 {
        self.inner.random_range(0.0..TAU)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
