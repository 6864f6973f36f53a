//! Benchmark functions and dataset sampling.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedRng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetName {
    Heaviside,
    #[serde(rename = "exp_sin_2d")]
    ExpSin2d,
    Xy,
    #[serde(rename = "exp_4d")]
    Exp4d,
    #[serde(rename = "exp_100d")]
    Exp100d,
}

impl TargetName {
    pub const ALL: [TargetName; 5] = [
        TargetName::Heaviside,
        TargetName::ExpSin2d,
        TargetName::Xy,
        TargetName::Exp4d,
        TargetName::Exp100d,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetName::Heaviside => "heaviside",
            TargetName::ExpSin2d => "exp_sin_2d",
            TargetName::Xy => "xy",
            TargetName::Exp4d => "exp_4d",
            TargetName::Exp100d => "exp_100d",
        }
    }
}

impl fmt::Display for TargetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TargetName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<_> = TargetName::ALL.iter().map(|t| t.as_str()).collect();
                Error::invalid(format!(
                    "unknown target `{s}` (known: {})",
                    known.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone)]
pub struct TargetFunction {
    pub name: TargetName,
    pub input_dim: usize,
    /// Per-axis sampling interval.
    pub domain: Vec<(f64, f64)>,
    eval: fn(&[f64]) -> f64,
}

fn heaviside(x: &[f64]) -> f64 {
    if x[0] > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn exp_sin_2d(x: &[f64]) -> f64 {
    ((PI * x[0]).sin() + x[1] * x[1]).exp()
}

fn xy(x: &[f64]) -> f64 {
    x[0] * x[1]
}

fn exp_4d(x: &[f64]) -> f64 {
    (0.5 * ((PI * (x[0] * x[0] + x[1] * x[1])).sin() + x[2] * x[3])).exp()
}

fn exp_100d(x: &[f64]) -> f64 {
    let s: f64 = x.iter().map(|v| (PI * v / 2.0).sin().powi(2)).sum();
    (s / 100.0).exp()
}

pub fn builtin_target(name: TargetName) -> TargetFunction {
    let (input_dim, eval): (usize, fn(&[f64]) -> f64) = match name {
        TargetName::Heaviside => (1, heaviside),
        TargetName::ExpSin2d => (2, exp_sin_2d),
        TargetName::Xy => (2, xy),
        TargetName::Exp4d => (4, exp_4d),
        TargetName::Exp100d => (100, exp_100d),
    };
    TargetFunction {
        name,
        input_dim,
        domain: vec![(-1.0, 1.0); input_dim],
        eval,
    }
}

/// Inputs `x: [n, D]` and labels `y: [n, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Tensor,
    pub y: Tensor,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TargetFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// Labels for the rows of `x: [n, D]`.
    pub fn label(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape().len() != 2 || x.cols() != self.input_dim {
            return Err(Error::Shape {
                op: "label",
                lhs: x.shape().to_vec(),
                rhs: vec![self.input_dim],
            });
        }
        let y = x
            .data()
            .chunks_exact(self.input_dim)
            .map(|row| self.eval(row))
            .collect();
        Tensor::new(vec![x.rows(), 1], y)
    }

    /// `n` i.i.d. uniform points over the domain.
    pub fn sample(&self, n: usize, rng: &mut SeedRng) -> Result<Dataset> {
        let mut data = Vec::with_capacity(n * self.input_dim);
        for _ in 0..n {
            for &(lo, hi) in &self.domain {
                data.push(rng.uniform(lo, hi));
            }
        }
        let x = Tensor::new(vec![n, self.input_dim], data)?;
        let y = self.label(&x)?;
        Ok(Dataset { x, y })
    }

    /// Tensor grid with `per_axis` points per axis, endpoints included.
    /// The last axis varies fastest.
    pub fn grid(&self, per_axis: usize) -> Result<Dataset> {
        if per_axis < 2 {
            return Err(Error::invalid("grid needs at least 2 points per axis"));
        }
        let d = self.input_dim;
        let total = per_axis
            .checked_pow(d as u32)
            .filter(|t| *t <= 10_000_000)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "a {per_axis}-point grid in {d} dimensions is too large"
                ))
            })?;
        let mut data = Vec::with_capacity(total * d);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            for (axis, &i) in idx.iter().enumerate() {
                let (lo, hi) = self.domain[axis];
                data.push(lo + (hi - lo) * i as f64 / (per_axis - 1) as f64);
            }
            for axis in (0..d).rev() {
                idx[axis] += 1;
                if idx[axis] < per_axis {
                    break;
                }
                idx[axis] = 0;
            }
        }
        let x = Tensor::new(vec![total, d], data)?;
        let y = self.label(&x)?;
        Ok(Dataset { x, y })
    }
}

/// Independent train and test sets drawn from separate sub-streams of `seed`.
pub fn sample_dataset(
    t: &TargetFunction,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::invalid("n_train and n_test must be positive"));
    }
    let mut root = SeedRng::new(seed);
    let mut train_rng = root.split();
    let mut test_rng = root.split();
    Ok((
        t.sample(n_train, &mut train_rng)?,
        t.sample(n_test, &mut test_rng)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definitions() {
        let h = builtin_target(TargetName::Heaviside);
        assert_eq!(h.eval(&[0.5]), 1.0);
        assert_eq!(h.eval(&[-0.5]), 0.0);
        assert_eq!(builtin_target(TargetName::Xy).eval(&[0.5, -0.5]), -0.25);
        assert_eq!(builtin_target(TargetName::Exp100d).eval(&[0.0; 100]), 1.0);
    }

    #[test]
    fn names_round_trip() {
        for t in TargetName::ALL {
            assert_eq!(t.as_str().parse::<TargetName>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.as_str()));
        }
        assert!("sinc".parse::<TargetName>().is_err());
    }

    #[test]
    fn dataset_shapes_and_determinism() {
        let t = builtin_target(TargetName::ExpSin2d);
        let (tr, te) = sample_dataset(&t, 1000, 1000, 3).unwrap();
        assert_eq!(tr.x.shape(), &[1000, 2]);
        assert_eq!(tr.y.shape(), &[1000, 1]);
        assert_ne!(tr.x, te.x);
        let (tr2, _) = sample_dataset(&t, 1000, 1000, 3).unwrap();
        assert_eq!(tr, tr2);
    }

    #[test]
    fn grid_has_endpoints() {
        let g = builtin_target(TargetName::Xy).grid(100).unwrap();
        assert_eq!(g.x.shape(), &[10000, 2]);
        assert_eq!(&g.x.data()[..2], &[-1.0, -1.0]);
        assert_eq!(&g.x.data()[19998..], &[1.0, 1.0]);
        assert_eq!(g.x.get(1, 1), -1.0 + 2.0 / 99.0);
    }
}
