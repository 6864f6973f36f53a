//! Single-hidden-layer network of Cauchy units.
//!
//! ```text
//! f(x) = c0 + sum_k (lambda1_k z_k + lambda2_k) / (z_k^2 + d_k^2),   z_k = w_k . x + b_k
//! ```
//!
//! Parameters are stored in this order, each as a tensor:
//!
//! | index | name      | shape    |
//! |-------|-----------|----------|
//! | 0     | `w`       | `[D, K]` |
//! | 1     | `b`       | `[1, K]` |
//! | 2     | `lambda1` | `[1, K]` |
//! | 3     | `lambda2` | `[1, K]` |
//! | 4     | `rho`     | `[1, K]` |
//! | 5     | `c0`      | `[1, 1]` |
//!
//! The bandwidth is `d_k = D_MIN + softplus(rho_k)`.

use serde::{Deserialize, Serialize};

use crate::autodiff::kernels::{cauchy_design, CauchyArgs};
use crate::autodiff::Array;
use crate::error::{Error, Result};
use crate::models::cauchy::{bandwidth, raw_bandwidth, D_MIN};
use crate::rng::SeedRng;
use crate::tensor::Tensor;

pub const XNET_PARAM_NAMES: [&str; 6] = ["w", "b", "lambda1", "lambda2", "rho", "c0"];

/// Indices of the parameters the output depends on linearly.
pub const XNET_LINEAR: [usize; 3] = [2, 3, 5];

/// Initialization scales. The defaults give `w ~ N(0, 1/D)`,
/// `b ~ U(-1, 1)`, `lambda ~ N(0, 1/K)` and `d = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XNetInit {
    /// Multiplies the standard deviation of `w`.
    pub w_scale: f64,
    /// Half-width of the uniform range of `b`.
    pub b_range: f64,
    /// Initial bandwidth of every unit.
    pub d0: f64,
    /// Initial `c0`.
    pub c0: f64,
}

impl Default for XNetInit {
    fn default() -> Self {
        Self {
            w_scale: 1.0,
            b_range: 1.0,
            d0: 1.0,
            c0: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XNet {
    input_dim: usize,
    units: usize,
    params: Vec<Tensor>,
}

impl XNet {
    pub fn new(input_dim: usize, units: usize, init: &XNetInit, rng: &mut SeedRng) -> Result<Self> {
        if input_dim == 0 || units == 0 {
            return Err(Error::invalid(
                "XNet needs input_dim >= 1 and at least one unit",
            ));
        }
        if !(init.d0 > D_MIN) {
            return Err(Error::invalid(format!(
                "initial bandwidth must exceed {D_MIN}"
            )));
        }
        let w_std = init.w_scale / (input_dim as f64).sqrt();
        let l_std = 1.0 / (units as f64).sqrt();
        let w = rng.normal_tensor(&[input_dim, units], 0.0, w_std);
        let b = rng.uniform_tensor(&[1, units], -init.b_range, init.b_range);
        let l1 = rng.normal_tensor(&[1, units], 0.0, l_std);
        let l2 = rng.normal_tensor(&[1, units], 0.0, l_std);
        let rho = Tensor::full(&[1, units], raw_bandwidth(init.d0));
        let c0 = Tensor::full(&[1, 1], init.c0);
        Ok(Self {
            input_dim,
            units,
            params: vec![w, b, l1, l2, rho, c0],
        })
    }

    pub fn from_params(params: Vec<Tensor>) -> Result<Self> {
        if params.len() != 6 {
            return Err(Error::invalid(format!(
                "XNet takes 6 parameter tensors, got {}",
                params.len()
            )));
        }
        let (input_dim, units) = match params[0].shape() {
            [d, k] if *d > 0 && *k > 0 => (*d, *k),
            s => return Err(Error::invalid(format!("XNet w must be [D, K], got {s:?}"))),
        };
        for (i, p) in params.iter().enumerate().skip(1) {
            let want: &[usize] = if i == 5 { &[1, 1] } else { &[1, units] };
            if p.shape() != want {
                return Err(Error::invalid(format!(
                    "XNet {} must be {want:?}, got {:?}",
                    XNET_PARAM_NAMES[i],
                    p.shape()
                )));
            }
        }
        Ok(Self {
            input_dim,
            units,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<Tensor> {
        self.params
    }

    pub fn param_count(&self) -> usize {
        self.units * (self.input_dim + 4) + 1
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        self.params[4]
            .data()
            .iter()
            .map(|&r| bandwidth(r))
            .collect()
    }

    /// Evaluates on `x: [N, D]` for any parameter representation.
    pub fn forward<A: Array>(p: &[A], x: &A) -> Result<A> {
        let d = p[4].softplus().add_scalar(D_MIN);
        x.cauchy_basis(&p[0], &p[1], &p[2], &p[3], &d)?.add(&p[5])
    }

    /// Input-space Laplacian of [`XNet::forward`], `[N, 1]`.
    pub fn laplacian<A: Array>(p: &[A], x: &A) -> Result<A> {
        let d = p[4].softplus().add_scalar(D_MIN);
        x.cauchy_laplacian(&p[0], &p[1], &p[2], &p[3], &d)
    }

    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        Self::forward(&self.params, x)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        match x.shape() {
            [_, d] if *d == self.input_dim => Ok(()),
            s => Err(Error::Shape {
                op: "xnet_forward",
                lhs: s.to_vec(),
                rhs: vec![self.input_dim],
            }),
        }
    }

    fn design(&self, x: &Tensor, laplacian: bool) -> Result<Tensor> {
        self.check_input(x)?;
        let d = self.bandwidths();
        let zero = vec![0.0; self.units];
        Ok(cauchy_design(
            &CauchyArgs {
                x,
                w: &self.params[0],
                b: self.params[1].data(),
                l1: &zero,
                l2: &zero,
                d: &d,
            },
            laplacian,
        ))
    }

    /// `[N, 2K + 1]` matrix with `design . linear_params() == predict(x)`.
    pub fn design_matrix(&self, x: &Tensor) -> Result<Tensor> {
        self.design(x, false)
    }

    /// `[N, 2K + 1]` matrix with `design . linear_params()` equal to the Laplacian.
    pub fn laplacian_design_matrix(&self, x: &Tensor) -> Result<Tensor> {
        self.design(x, true)
    }

    /// `[lambda1, lambda2, c0]` flattened.
    pub fn linear_params(&self) -> Vec<f64> {
        XNET_LINEAR
            .iter()
            .flat_map(|&i| self.params[i].data().iter().copied())
            .collect()
    }

    pub fn set_linear_params(&mut self, beta: &[f64]) -> Result<()> {
        let k = self.units;
        if beta.len() != 2 * k + 1 {
            return Err(Error::invalid(format!(
                "expected {} linear coefficients, got {}",
                2 * k + 1,
                beta.len()
            )));
        }
        self.params[2].data_mut().copy_from_slice(&beta[..k]);
        self.params[3].data_mut().copy_from_slice(&beta[k..2 * k]);
        self.params[5].data_mut()[0] = beta[2 * k];
        Ok(())
    }
}
