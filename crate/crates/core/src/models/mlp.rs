//! Fully connected tanh network with a linear output layer.

use crate::autodiff::Array;
use crate::error::{Error, Result};
use crate::rng::SeedRng;
use crate::tensor::Tensor;

/// Parameters alternate `W_i: [w_i, w_{i+1}]` and `b_i: [1, w_{i+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<Tensor>,
}

impl Mlp {
    /// Glorot-normal weights, zero biases.
    pub fn new(widths: &[usize], rng: &mut SeedRng) -> Result<Self> {
        Self::check_widths(widths)?;
        let mut params = Vec::with_capacity(2 * (widths.len() - 1));
        for pair in widths.windows(2) {
            let std = (2.0 / (pair[0] + pair[1]) as f64).sqrt();
            params.push(rng.normal_tensor(&[pair[0], pair[1]], 0.0, std));
            params.push(Tensor::zeros(&[1, pair[1]]));
        }
        Ok(Self {
            widths: widths.to_vec(),
            params,
        })
    }

    pub fn from_params(widths: &[usize], params: Vec<Tensor>) -> Result<Self> {
        Self::check_widths(widths)?;
        if params.len() != 2 * (widths.len() - 1) {
            return Err(Error::invalid(format!(
                "MLP with widths {widths:?} takes {} tensors, got {}",
                2 * (widths.len() - 1),
                params.len()
            )));
        }
        for (i, pair) in widths.windows(2).enumerate() {
            if params[2 * i].shape() != [pair[0], pair[1]]
                || params[2 * i + 1].shape() != [1, pair[1]]
            {
                return Err(Error::invalid(format!(
                    "MLP layer {i} has mismatched parameter shapes"
                )));
            }
        }
        Ok(Self {
            widths: widths.to_vec(),
            params,
        })
    }

    fn check_widths(widths: &[usize]) -> Result<()> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::invalid(format!(
                "MLP widths must be >= 2 positive entries, got {widths:?}"
            )));
        }
        Ok(())
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
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

    pub fn param_names(&self) -> Vec<String> {
        (0..self.widths.len() - 1)
            .flat_map(|i| [format!("W{i}"), format!("b{i}")])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    pub fn forward<A: Array>(p: &[A], x: &A) -> Result<A> {
        let layers = p.len() / 2;
        let mut h = x.clone();
        for i in 0..layers {
            h = h.matmul(&p[2 * i])?.add(&p[2 * i + 1])?;
            if i + 1 < layers {
                h = h.tanh();
            }
        }
        Ok(h)
    }

    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        match x.shape() {
            [_, d] if *d == self.widths[0] => Self::forward(&self.params, x),
            s => Err(Error::Shape {
                op: "mlp_forward",
                lhs: s.to_vec(),
                rhs: vec![self.widths[0]],
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_is_zero() {
        let widths = [2, 5, 1];
        let params = vec![
            Tensor::zeros(&[2, 5]),
            Tensor::zeros(&[1, 5]),
            Tensor::zeros(&[5, 1]),
            Tensor::zeros(&[1, 1]),
        ];
        let m = Mlp::from_params(&widths, params).unwrap();
        let x = SeedRng::new(0).uniform_tensor(&[4, 2], -1.0, 1.0);
        assert!(m.predict(&x).unwrap().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn one_hidden_unit_by_hand() {
        let params = vec![
            Tensor::full(&[1, 1], 2.0),
            Tensor::zeros(&[1, 1]),
            Tensor::full(&[1, 1], 1.5),
            Tensor::full(&[1, 1], 0.25),
        ];
        let m = Mlp::from_params(&[1, 1, 1], params).unwrap();
        let y = m.predict(&Tensor::column(vec![0.3])).unwrap();
        assert!((y.data()[0] - (1.5 * (0.6f64).tanh() + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn param_count_matches_tensors() {
        let m = Mlp::new(&[2, 20, 20, 1], &mut SeedRng::new(1)).unwrap();
        let counted: usize = m.params().iter().map(Tensor::len).sum();
        assert_eq!(counted, m.param_count());
        assert_eq!(counted, 2 * 20 + 20 + 20 * 20 + 20 + 20 + 1);
    }

    #[test]
    fn dimension_mismatch() {
        let m = Mlp::new(&[2, 3, 1], &mut SeedRng::new(1)).unwrap();
        assert!(m.predict(&Tensor::zeros(&[2, 3])).is_err());
    }
}
