//! The Cauchy activation and the bandwidth reparameterization.

use crate::autodiff::softplus;
use crate::error::{Error, Result};

/// Smallest allowed bandwidth.
pub const D_MIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub d: f64,
}

impl CauchyParams {
    pub fn new(lambda1: f64, lambda2: f64, d: f64) -> Result<Self> {
        if !(d.abs() >= D_MIN) {
            return Err(Error::invalid(format!(
                "bandwidth |d| = {d} is below {D_MIN}"
            )));
        }
        Ok(Self {
            lambda1,
            lambda2,
            d,
        })
    }

    pub fn eval(&self, z: f64) -> f64 {
        cauchy_eval(z, self)
    }
}

/// `(lambda1 z + lambda2) / (z^2 + d^2)`.
pub fn cauchy_eval(z: f64, p: &CauchyParams) -> f64 {
    (p.lambda1 * z + p.lambda2) / (z * z + p.d * p.d)
}

/// Bandwidth from its raw parameter: `D_MIN + softplus(rho)`.
pub fn bandwidth(rho: f64) -> f64 {
    D_MIN + softplus(rho)
}

/// Raw parameter giving bandwidth `d`. Requires `d > D_MIN`.
pub fn raw_bandwidth(d: f64) -> f64 {
    let s = d - D_MIN;
    // softplus^-1(s) = log(exp(s) - 1), rearranged to stay finite for large s.
    s + (-(-s).exp_m1()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert_eq!(
            cauchy_eval(0.0, &CauchyParams::new(1.0, 0.0, 1.0).unwrap()),
            0.0
        );
        assert_eq!(
            cauchy_eval(0.0, &CauchyParams::new(0.0, 1.0, 2.0).unwrap()),
            0.25
        );
        assert_eq!(
            cauchy_eval(1.0, &CauchyParams::new(1.0, 1.0, 1.0).unwrap()),
            1.0
        );
    }

    #[test]
    fn tiny_bandwidth_rejected() {
        assert!(CauchyParams::new(1.0, 1.0, 1e-5).is_err());
        assert!(CauchyParams::new(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn bandwidth_round_trip() {
        for d in [0.01, 0.5, 1.0, 3.0, 40.0] {
            assert!((bandwidth(raw_bandwidth(d)) - d).abs() < 1e-12 * d.max(1.0));
        }
        assert!(bandwidth(-800.0) >= D_MIN);
    }
}
