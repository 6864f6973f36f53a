//! Error metrics shared by every experiment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    /// Seconds spent training; zero when not measured.
    pub wall_time_s: f64,
}

impl Metrics {
    /// `rmse^2 == mse` (relative 1e-12) and `mae <= rmse`.
    pub fn identities_hold(&self) -> bool {
        let sq = self.rmse * self.rmse;
        (sq - self.mse).abs() <= 1e-12 * self.mse.max(f64::MIN_POSITIVE)
            && self.mae <= self.rmse * (1.0 + 1e-12)
    }
}

/// Metrics between two tensors holding the same number of values.
pub fn compute_metrics(pred: &Tensor, actual: &Tensor, elapsed: f64) -> Result<Metrics> {
    if pred.len() != actual.len() {
        return Err(Error::Shape {
            op: "compute_metrics",
            lhs: pred.shape().to_vec(),
            rhs: actual.shape().to_vec(),
        });
    }
    metrics_from_slices(pred.data(), actual.data(), elapsed)
}

pub fn metrics_from_slices(pred: &[f64], actual: &[f64], elapsed: f64) -> Result<Metrics> {
    if pred.len() != actual.len() {
        return Err(Error::Shape {
            op: "compute_metrics",
            lhs: vec![pred.len()],
            rhs: vec![actual.len()],
        });
    }
    if pred.is_empty() {
        return Err(Error::invalid("metrics need at least one value"));
    }
    let n = pred.len() as f64;
    let (mut sq, mut abs) = (0.0, 0.0);
    for (p, a) in pred.iter().zip(actual) {
        let e = p - a;
        sq += e * e;
        abs += e.abs();
    }
    let mse = sq / n;
    Ok(Metrics {
        mse,
        rmse: mse.sqrt(),
        mae: abs / n,
        wall_time_s: elapsed,
    })
}
