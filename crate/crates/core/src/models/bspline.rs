//! Least-squares B-spline fit in one dimension, used as a baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ridge_solve;
use crate::tensor::Tensor;

/// Clamped uniform B-spline of degree `degree` with `grid` intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineFit1D {
    pub degree: usize,
    pub grid: usize,
    pub knots: Vec<f64>,
    pub coef: Vec<f64>,
}

/// `grid + 1` uniform breakpoints on `[lo, hi]`, ends repeated `degree + 1` times.
pub fn clamped_knots(lo: f64, hi: f64, grid: usize, degree: usize) -> Result<Vec<f64>> {
    if !(lo < hi) || grid == 0 {
        return Err(Error::invalid(format!(
            "bad spline domain [{lo}, {hi}] with {grid} intervals"
        )));
    }
    let mut t = vec![lo; degree + 1];
    let h = (hi - lo) / grid as f64;
    t.extend((1..grid).map(|i| lo + h * i as f64));
    t.extend(std::iter::repeat_n(hi, degree + 1));
    Ok(t)
}

fn basis_count(knots: &[f64], degree: usize) -> usize {
    knots.len() - degree - 1
}

/// Index `s` with `t[s] <= x < t[s + 1]`, clamped into the valid range.
fn find_span(knots: &[f64], degree: usize, x: f64) -> usize {
    let n = basis_count(knots, degree);
    if x >= knots[n] {
        return n - 1;
    }
    if x <= knots[degree] {
        return degree;
    }
    let (mut lo, mut hi) = (degree, n);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if x < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// The `degree + 1` basis values that can be nonzero at `x`, with the index
/// of the first one (Cox-de Boor recursion).
pub fn nonzero_basis(knots: &[f64], degree: usize, x: f64) -> (usize, Vec<f64>) {
    let span = find_span(knots, degree, x);
    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    (span - degree, n)
}

impl BSplineFit1D {
    /// Fits on the samples' own range.
    pub fn fit(xs: &[f64], ys: &[f64], grid: usize, degree: usize) -> Result<Self> {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::fit_on(xs, ys, lo, hi, grid, degree)
    }

    /// Fits with knots spanning `[lo, hi]`; every sample must lie inside.
    pub fn fit_on(
        xs: &[f64],
        ys: &[f64],
        lo: f64,
        hi: f64,
        grid: usize,
        degree: usize,
    ) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Shape {
                op: "bspline_fit",
                lhs: vec![xs.len()],
                rhs: vec![ys.len()],
            });
        }
        if let Some(x) = xs.iter().find(|x| !(lo..=hi).contains(*x)) {
            return Err(Error::invalid(format!(
                "sample {x} outside spline domain [{lo}, {hi}]"
            )));
        }
        let knots = clamped_knots(lo, hi, grid, degree)?;
        let nb = basis_count(&knots, degree);
        let rank_error = || Error::RankDeficient {
            detail: format!(
                "{nb} spline basis functions from {} samples (G = {grid})",
                xs.len()
            ),
        };
        if xs.len() < nb {
            return Err(rank_error());
        }
        let mut design = vec![0.0; xs.len() * nb];
        let mut covered = vec![false; nb];
        for (i, &x) in xs.iter().enumerate() {
            let (first, vals) = nonzero_basis(&knots, degree, x);
            for (j, v) in vals.into_iter().enumerate() {
                design[i * nb + first + j] = v;
                covered[first + j] |= v != 0.0;
            }
        }
        if covered.contains(&false) {
            return Err(rank_error());
        }
        let design = Tensor::new(vec![xs.len(), nb], design)?;
        let coef = ridge_solve(&design, ys, 0.0).map_err(|_| rank_error())?;
        Ok(Self {
            degree,
            grid,
            knots,
            coef,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (first, vals) = nonzero_basis(&self.knots, self.degree, x);
        vals.iter()
            .enumerate()
            .map(|(j, v)| v * self.coef[first + j])
            .sum()
    }

    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn partition_of_unity() {
        let knots = clamped_knots(-1.0, 1.0, 17, 3).unwrap();
        for i in 1..1000 {
            let x = -1.0 + 2.0 * i as f64 / 1000.0;
            let (_, v) = nonzero_basis(&knots, 3, x);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reproduces_constants_and_lines() {
        let xs = grid(500);
        let c = vec![2.5; xs.len()];
        let s = BSplineFit1D::fit(&xs, &c, 20, 3).unwrap();
        assert!(xs.iter().all(|&x| (s.eval(x) - 2.5).abs() < 1e-10));
        let s = BSplineFit1D::fit(&xs, &xs, 20, 3).unwrap();
        assert!(xs.iter().all(|&x| (s.eval(x) - x).abs() < 1e-8));
    }

    #[test]
    fn too_few_samples_is_rank_error() {
        let xs = grid(10);
        let err = BSplineFit1D::fit(&xs, &xs, 50, 3).unwrap_err();
        assert!(err.to_string().contains("smaller grid"), "{err}");
    }

    #[test]
    fn empty_interval_is_rank_error() {
        let xs: Vec<f64> = grid(400).into_iter().filter(|x| x.abs() > 0.3).collect();
        assert!(matches!(
            BSplineFit1D::fit(&xs, &xs, 40, 3),
            Err(Error::RankDeficient { .. })
        ));
    }
}
