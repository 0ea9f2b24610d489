use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::Matrix;
use crate::error::{Error, Result};

/// Seeded generator used for every random draw in the crate.
///
/// Backed by xoshiro256++ (a member of the xorshift family). The 64-bit seed
/// is expanded into the 256-bit state with SplitMix64-style `seed_from_u64`,
/// so a given seed yields the same stream on every platform.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: Xoshiro256PlusPlus,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform in `[lo, hi)`. Caller guarantees `lo < hi`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        loop {
            let x = lo + (hi - lo) * self.next_f64();
            // Rounding can land exactly on `hi` for some ranges.
            if x < hi {
                return x;
            }
        }
    }

    /// Standard normal via the Box–Muller transform (cosine branch only).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Draws an index with probability proportional to `weights[i]`.
    /// Weights must be non-negative with a positive sum.
    pub fn weighted_index(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let target = self.next_f64() * total;
        let mut acc = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return i;
            }
        }
        // Only reachable through rounding in the cumulative sum.
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

/// `rows × cols` matrix of i.i.d. draws from `[lo, hi)`.
pub fn rng_uniform(rng: &mut Rng, lo: f64, hi: f64, rows: usize, cols: usize) -> Result<Matrix> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Argument(format!(
            "uniform range requires finite lo < hi, got [{lo}, {hi})"
        )));
    }
    let data = (0..rows * cols).map(|_| rng.uniform(lo, hi)).collect();
    Matrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        let a = rng_uniform(&mut Rng::new(7), -1.0, 1.0, 4, 5).unwrap();
        let b = rng_uniform(&mut Rng::new(7), -1.0, 1.0, 4, 5).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn uniform_mean_is_near_half() {
        let m = rng_uniform(&mut Rng::new(11), 0.0, 1.0, 100, 100).unwrap();
        let mean = m.as_slice().iter().sum::<f64>() / 1e4;
        assert!((0.47..=0.53).contains(&mean), "mean {mean}");
        assert!(m.as_slice().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn empty_range_is_rejected() {
        assert!(matches!(
            rng_uniform(&mut Rng::new(1), 5.0, 5.0, 1, 1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn normal_moments() {
        let mut rng = Rng::new(3);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.standard_normal()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn weighted_index_skips_zero_weights() {
        let mut rng = Rng::new(5);
        for _ in 0..1000 {
            assert_eq!(rng.weighted_index(&[0.0, 2.0, 0.0]), 1);
        }
    }
}
