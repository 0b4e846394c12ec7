//! Seeded random source.
//!
//! Every stochastic step (subsampling, k-means++ seeding, synthetic data in
//! tests) draws from xoshiro256++ seeded through SplitMix64, so a seed fully
//! determines the stream in any implementation that follows the published
//! reference constants.
//!
//! Derived draws are defined here rather than delegated, because their exact
//! arithmetic is part of the reproducibility contract:
//!
//! * `below(n)` maps a 64-bit output `x` to `(x as u128 * n as u128) >> 64`.
//! * `unit_f64()` is `(x >> 11) * 2^-53`, uniform on `[0, 1)`.
//! * `sample_indices(n, m)` runs `m` steps of a partial Fisher-Yates shuffle
//!   of `0..n` (step `i` swaps position `i` with `i + below(n - i)`) and
//!   returns the first `m` positions sorted ascending.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Clone, Debug)]
pub struct SeededRng(Xoshiro256PlusPlus);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `0..bound`. `bound` must be non-zero.
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }

    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box-Muller, cosine branch only).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit_f64();
        let u2 = self.unit_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// `m` distinct indices from `0..n`, ascending.
    pub fn sample_indices(&mut self, n: usize, m: usize) -> Vec<usize> {
        let m = m.min(n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..m {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(m);
        pool.sort_unstable();
        pool
    }
}
