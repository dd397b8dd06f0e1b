//! Seeded random number generation for parameter initialization and
//! shuffling. ChaCha8 keeps runs bitwise reproducible across platforms.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn seed_from(seed: u64) -> Self {
        Rng { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Xavier/Glorot-uniform sample vector for a fan_in×fan_out weight.
    pub fn xavier(&mut self, fan_in: usize, fan_out: usize, count: usize) -> Vec<f64> {
        let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        (0..count).map(|_| self.uniform(-bound, bound)).collect()
    }

    /// Fisher-Yates shuffle of an index slice.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = (self.inner.next_u64() % (i as u64 + 1)) as usize;
            items.swap(i, j);
        }
    }
}
