//! Seeded random streams.
//!
//! Every stochastic step in the crate draws from a [`SeedRng`]. Independent
//! sub-streams are derived with [`SeedRng::split`], which jumps the generator
//! ahead by 2^128 steps, so adding draws to one stream never shifts another.

use rand::{RngExt, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct SeedRng {
    inner: Xoshiro256PlusPlus,
}

impl SeedRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// Returns a new stream and advances `self` past it.
    pub fn split(&mut self) -> SeedRng {
        let child = self.inner.clone();
        self.inner.jump();
        SeedRng { inner: child }
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.inner);
        mean + std * z
    }

    /// Uniform integer in `[0, n)`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn uniform_tensor(&mut self, shape: &[usize], lo: f64, hi: f64) -> Tensor {
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.uniform(lo, hi)).collect();
        Tensor::new(shape.to_vec(), data).expect("shape matches data")
    }

    pub fn normal_tensor(&mut self, shape: &[usize], mean: f64, std: f64) -> Tensor {
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.normal(mean, std)).collect();
        Tensor::new(shape.to_vec(), data).expect("shape matches data")
    }

    /// Fisher-Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.index(i + 1);
            p.swap(i, j);
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeedRng::new(7);
        let mut b = SeedRng::new(7);
        for _ in 0..10 {
            assert_eq!(a.normal(0.0, 1.0), b.normal(0.0, 1.0));
        }
    }

    #[test]
    fn split_streams_are_independent_of_later_draws() {
        let mut a = SeedRng::new(3);
        let mut s1 = a.split();
        let mut s2 = a.split();
        let mut b = SeedRng::new(3);
        let mut t1 = b.split();
        for _ in 0..100 {
            t1.uniform(0.0, 1.0);
        }
        let mut t2 = b.split();
        assert_eq!(s2.uniform(0.0, 1.0), t2.uniform(0.0, 1.0));
        assert_ne!(s1.uniform(0.0, 1.0), s2.uniform(0.0, 1.0));
    }

    #[test]
    fn uniform_in_range() {
        let mut r = SeedRng::new(1);
        for _ in 0..1000 {
            let v = r.uniform(-2.0, 3.0);
            assert!((-2.0..3.0).contains(&v));
        }
    }

    #[test]
    fn permutation_is_bijection() {
        let mut r = SeedRng::new(5);
        let mut p = r.permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
