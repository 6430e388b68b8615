//! Seeded randomness shared by weight init, shuffling, splitting and data
//! generation.
//!
//! Every random draw in the crate flows through [`SeededRng`], so the exact
//! byte stream is pinned down here rather than delegated to a distribution
//! library whose algorithms may change between releases:
//!
//! - Generator: ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded with
//!   `seed_from_u64(seed)`.
//! - Unit uniform: the top 53 bits of `next_u64()` scaled by 2⁻⁵³, giving a
//!   value in `[0, 1)`.
//! - Bounded integer in `0..n`: `(next_u64() as u128 * n as u128) >> 64`
//!   (multiply-shift, no rejection step).
//! - Standard normal: Marsaglia polar method. Both variates of an accepted
//!   pair are used; the second is cached for the next call.
//! - Shuffle: Fisher–Yates from the last index down to 1.
//! - Sub-seeds: one SplitMix64 step over `seed ^ stream_tag`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[low, high]`.
    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.unit()
    }

    /// Uniform integer in `0..n`. `n` must be non-zero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.unit() - 1.0;
            let v = 2.0 * self.unit() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * factor);
                return u * factor;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Derives an independent seed for a named sub-stream.
pub fn sub_seed(seed: u64, stream_tag: u64) -> u64 {
    let mut z = (seed ^ stream_tag).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(9);
        let mut b = SeededRng::new(9);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn unit_in_half_open_interval() {
        let mut rng = SeededRng::new(1);
        for _ in 0..10_000 {
            let u = rng.unit();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = SeededRng::new(2);
        for n in 1..50 {
            for _ in 0..50 {
                assert!(rng.below(n) < n);
            }
        }
    }

    #[test]
    fn normal_moments() {
        let mut rng = SeededRng::new(3);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n as f64;
        // 5 standard errors
        assert!(mean.abs() < 5.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn shuffle_is_permutation() {
        let mut rng = SeededRng::new(4);
        let mut v: Vec<usize> = (0..37).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..37).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }

    #[test]
    fn sub_seeds_differ_by_tag() {
        assert_ne!(sub_seed(1, 0), sub_seed(1, 1));
        assert_eq!(sub_seed(5, 7), sub_seed(5, 7));
    }
}
