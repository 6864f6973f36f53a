//! Sliding windows over a series with a contiguous train/test split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Affine map of the training range onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn fit(values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { min, max }
    }

    fn span(&self) -> f64 {
        let s = self.max - self.min;
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    pub fn forward(&self, v: f64) -> f64 {
        (v - self.min) / self.span()
    }

    pub fn inverse(&self, v: f64) -> f64 {
        v * self.span() + self.min
    }
}

/// Where the training prefix ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Number of leading series points used for training.
    TrainLen(usize),
    /// Fraction of the series used for training, rounded down.
    Fraction(f64),
}

impl Split {
    pub fn train_len(&self, n: usize) -> Result<usize> {
        let len = match *self {
            Split::TrainLen(k) => k,
            Split::Fraction(f) if (0.0..=1.0).contains(&f) => (f * n as f64).floor() as usize,
            Split::Fraction(f) => {
                return Err(Error::invalid(format!("split fraction {f} outside [0, 1]")))
            }
        };
        if len > n {
            return Err(Error::invalid(format!(
                "training prefix {len} longer than series {n}"
            )));
        }
        Ok(len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowDataset {
    /// `[N, T, 1]`.
    pub windows: Tensor,
    /// `[N, 1]`, in the (possibly normalized) model scale.
    pub targets: Tensor,
    /// Series index of each window's target.
    pub target_index: Vec<usize>,
    /// Windows before this index are training windows.
    pub split: usize,
    pub window: usize,
    pub norm: Option<MinMax>,
}

/// Windows of length `t` with stride 1. A window whose target index is below
/// the training prefix length is a training window; the rest are test windows.
pub fn make_windows(
    series: &[f64],
    t: usize,
    split: Split,
    normalize: bool,
) -> Result<WindowDataset> {
    if t == 0 {
        return Err(Error::invalid("window length must be at least 1"));
    }
    if series.len() < t + 1 {
        return Err(Error::invalid(format!(
            "series of length {} is shorter than window + 1 = {}",
            series.len(),
            t + 1
        )));
    }
    let train_len = split.train_len(series.len())?;
    let norm = if normalize {
        if train_len == 0 {
            return Err(Error::invalid(
                "normalization needs a non-empty training prefix",
            ));
        }
        Some(MinMax::fit(&series[..train_len]))
    } else {
        None
    };
    let scaled: Vec<f64> = match norm {
        Some(m) => series.iter().map(|&v| m.forward(v)).collect(),
        None => series.to_vec(),
    };
    let n = series.len() - t;
    let mut windows = Vec::with_capacity(n * t);
    let mut targets = Vec::with_capacity(n);
    let mut target_index = Vec::with_capacity(n);
    for start in 0..n {
        windows.extend_from_slice(&scaled[start..start + t]);
        targets.push(scaled[start + t]);
        target_index.push(start + t);
    }
    let split = target_index.iter().filter(|&&i| i < train_len).count();
    Ok(WindowDataset {
        windows: Tensor::new(vec![n, t, 1], windows)?,
        targets: Tensor::new(vec![n, 1], targets)?,
        target_index,
        split,
        window: t,
        norm,
    })
}

impl WindowDataset {
    pub fn len(&self) -> usize {
        self.target_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn train_range(&self) -> std::ops::Range<usize> {
        0..self.split
    }

    pub fn test_range(&self) -> std::ops::Range<usize> {
        self.split..self.len()
    }

    /// Per-time-step inputs `[rows, 1]` for the windows in `rows`.
    pub fn steps(&self, rows: std::ops::Range<usize>) -> Vec<Tensor> {
        let t = self.window;
        let w = self.windows.data();
        (0..t)
            .map(|s| {
                let col: Vec<f64> = rows.clone().map(|r| w[r * t + s]).collect();
                Tensor::from_parts(vec![col.len(), 1], col)
            })
            .collect()
    }

    pub fn targets_in(&self, rows: std::ops::Range<usize>) -> Tensor {
        let col = self.targets.data()[rows].to_vec();
        Tensor::from_parts(vec![col.len(), 1], col)
    }

    /// Maps model-scale values back to the series scale.
    pub fn denormalize(&self, v: f64) -> f64 {
        match self.norm {
            Some(m) => m.inverse(v),
            None => v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_window() {
        let s: Vec<f64> = (1..=6).map(f64::from).collect();
        let w = make_windows(&s, 5, Split::TrainLen(6), false).unwrap();
        assert_eq!(w.windows.data(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(w.targets.data(), &[6.0]);
    }

    #[test]
    fn stock_counts() {
        let s: Vec<f64> = (0..252).map(|i| i as f64).collect();
        let w = make_windows(&s, 10, Split::TrainLen(201), true).unwrap();
        assert_eq!(w.train_range().len(), 191);
        assert_eq!(w.test_range().len(), 51);
        assert!(w.target_index[..w.split].iter().all(|&i| i < 201));
        assert!(w.target_index[w.split..].iter().all(|&i| i >= 201));
    }

    #[test]
    fn normalization_round_trip() {
        let s = [3.0, 5.0, 4.0, 9.0, 7.0, 6.0, 12.0];
        let w = make_windows(&s, 2, Split::TrainLen(5), true).unwrap();
        let m = w.norm.unwrap();
        assert_eq!((m.min, m.max), (3.0, 9.0));
        for r in w.train_range() {
            let back = w.denormalize(w.targets.data()[r]);
            assert!((back - s[w.target_index[r]]).abs() < 1e-12);
        }
    }

    #[test]
    fn too_short() {
        assert!(make_windows(&[1.0, 2.0], 2, Split::TrainLen(1), false).is_err());
    }

    #[test]
    fn steps_are_columns() {
        let s: Vec<f64> = (0..8).map(f64::from).collect();
        let w = make_windows(&s, 3, Split::Fraction(0.75), false).unwrap();
        let st = w.steps(0..2);
        assert_eq!(st.len(), 3);
        assert_eq!(st[0].data(), &[0.0, 1.0]);
        assert_eq!(st[2].data(), &[2.0, 3.0]);
    }
}
