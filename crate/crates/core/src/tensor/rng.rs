use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::Matrix;
use crate::scalar::Scalar;

/// Seedable pseudo-random generator.
///
/// xoshiro256++ seeded through SplitMix64 expansion of a `u64`; normal
/// draws use the ziggurat sampler of `rand_distr`. The same seed always
/// yields the same stream of draws.
#[derive(Clone, Debug)]
pub struct Rng(Xoshiro256PlusPlus);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    /// Uniform draw in `[lo, hi)`; returns `lo` when the range is empty.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.0);
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }

    /// Samples an index with probability proportional to `weights`.
    ///
    /// Falls back to a uniform draw when the weights sum to zero.
    pub fn weighted_index(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return self.below(weights.len());
        }
        let target = self.uniform() * total;
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                last_positive = i;
            }
            acc += w;
            if target < acc && w > 0.0 {
                return i;
            }
        }
        last_positive
    }

    /// Derives an independent generator, e.g. one per repeated run.
    pub fn fork(&mut self) -> Rng {
        Rng(Xoshiro256PlusPlus::seed_from_u64(self.0.random::<u64>()))
    }
}

/// Matrix of i.i.d. `Normal(mean, std)` entries.
pub fn sample_normal<T: Scalar>(rng: &mut Rng, rows: usize, cols: usize, mean: f64, std: f64) -> Matrix<T> {
    assert!(std >= 0.0, "standard deviation must be non-negative");
    Matrix::from_fn(rows, cols, |_, _| T::of(mean + std * rng.normal()))
}

/// Matrix of i.i.d. `Uniform[lo, hi)` entries.
pub fn sample_uniform<T: Scalar>(rng: &mut Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix<T> {
    assert!(lo <= hi, "empty uniform range");
    Matrix::from_fn(rows, cols, |_, _| T::of(rng.uniform_range(lo, hi)))
}
