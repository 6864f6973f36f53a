//! LSTM forecaster with either an affine or an XNet readout.
//!
//! Gate weights act on the concatenation `[x_t, h_{t-1}]` and are stored as
//! `[D + H, H]` matrices so that a gate pre-activation is `[x, h] . W + b`
//! (the transpose of the usual `H x (D + H)` layout). Parameter order:
//!
//! `W_i, W_f, W_g, W_o, b_i, b_f, b_g, b_o`, then the head parameters
//! (`v: [H, 1], c: [1, 1]` for the affine head, the six XNet tensors otherwise).

use serde::{Deserialize, Serialize};

use crate::autodiff::Array;
use crate::error::{Error, Result};
use crate::models::xnet::{XNet, XNetInit, XNET_PARAM_NAMES};
use crate::rng::SeedRng;
use crate::tensor::Tensor;

const GATES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Head {
    Affine,
    Xnet {
        units: usize,
        #[serde(default)]
        init: XNetInit,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    input_dim: usize,
    hidden: usize,
    head: Head,
    params: Vec<Tensor>,
}

impl Lstm {
    /// Gate weights and biases `~ U(-1/sqrt(H), 1/sqrt(H))`; the affine head
    /// uses the same range, the XNet head its own initialization.
    pub fn new(input_dim: usize, hidden: usize, head: Head, rng: &mut SeedRng) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::invalid("LSTM needs input_dim >= 1 and hidden >= 1"));
        }
        let r = 1.0 / (hidden as f64).sqrt();
        let mut params = Vec::new();
        for _ in 0..GATES {
            params.push(rng.uniform_tensor(&[input_dim + hidden, hidden], -r, r));
        }
        for _ in 0..GATES {
            params.push(rng.uniform_tensor(&[1, hidden], -r, r));
        }
        match &head {
            Head::Affine => {
                params.push(rng.uniform_tensor(&[hidden, 1], -r, r));
                params.push(rng.uniform_tensor(&[1, 1], -r, r));
            }
            Head::Xnet { units, init } => {
                params.extend(XNet::new(hidden, *units, init, rng)?.into_params());
            }
        }
        Ok(Self {
            input_dim,
            hidden,
            head,
            params,
        })
    }

    pub fn from_params(
        input_dim: usize,
        hidden: usize,
        head: Head,
        params: Vec<Tensor>,
    ) -> Result<Self> {
        let head_len = match &head {
            Head::Affine => 2,
            Head::Xnet { .. } => 6,
        };
        if params.len() != 2 * GATES + head_len {
            return Err(Error::invalid(format!(
                "LSTM takes {} tensors, got {}",
                2 * GATES + head_len,
                params.len()
            )));
        }
        for (i, p) in params.iter().enumerate().take(2 * GATES) {
            let want = if i < GATES {
                vec![input_dim + hidden, hidden]
            } else {
                vec![1, hidden]
            };
            if p.shape() != want.as_slice() {
                return Err(Error::invalid(format!(
                    "LSTM gate tensor {i} must be {want:?}, got {:?}",
                    p.shape()
                )));
            }
        }
        match &head {
            Head::Affine => {
                if params[8].shape() != [hidden, 1] || params[9].shape() != [1, 1] {
                    return Err(Error::invalid("affine head must be v: [H, 1], c: [1, 1]"));
                }
            }
            Head::Xnet { units, .. } => {
                let x = XNet::from_params(params[8..].to_vec())?;
                if x.input_dim() != hidden || x.units() != *units {
                    return Err(Error::invalid(
                        "XNet head does not match hidden size or unit count",
                    ));
                }
            }
        }
        Ok(Self {
            input_dim,
            hidden,
            head,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn head(&self) -> &Head {
        &self.head
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
        let mut names: Vec<String> = ["W_i", "W_f", "W_g", "W_o", "b_i", "b_f", "b_g", "b_o"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        match self.head {
            Head::Affine => names.extend(["head.v".to_string(), "head.c".to_string()]),
            Head::Xnet { .. } => names.extend(XNET_PARAM_NAMES.iter().map(|n| format!("head.{n}"))),
        }
        names
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// One recurrence step on a batch: `x_t: [B, D]`, `h, c: [B, H]`.
    pub fn step<A: Array>(p: &[A], x_t: &A, h: &A, c: &A) -> Result<(A, A)> {
        let xh = A::concat_cols(&[x_t.clone(), h.clone()])?;
        let gate = |g: usize| -> Result<A> { xh.matmul(&p[g])?.add(&p[GATES + g]) };
        let i = gate(0)?.sigmoid();
        let f = gate(1)?.sigmoid();
        let g = gate(2)?.tanh();
        let o = gate(3)?.sigmoid();
        let c_next = f.mul(c)?.add(&i.mul(&g)?)?;
        let h_next = o.mul(&c_next.tanh())?;
        Ok((h_next, c_next))
    }

    /// Hidden state after running over `steps` (each `[B, D]`) from zero state.
    pub fn final_hidden<A: Array>(p: &[A], hidden: usize, steps: &[A]) -> Result<A> {
        let first = steps
            .first()
            .ok_or_else(|| Error::invalid("empty input window"))?;
        let batch = first.shape()[0];
        let zero = first.lift(Tensor::zeros(&[batch, hidden]));
        let (mut h, mut c) = (zero.clone(), zero);
        for x_t in steps {
            (h, c) = Self::step(p, x_t, &h, &c)?;
        }
        Ok(h)
    }

    pub fn apply_head<A: Array>(head: &Head, p: &[A], h: &A) -> Result<A> {
        match head {
            Head::Affine => h.matmul(&p[2 * GATES])?.add(&p[2 * GATES + 1]),
            Head::Xnet { .. } => XNet::forward(&p[2 * GATES..], h),
        }
    }

    /// Prediction `[B, 1]` for a batch of windows given as per-step slices.
    pub fn forward<A: Array>(&self, p: &[A], steps: &[A]) -> Result<A> {
        let h = Self::final_hidden(p, self.hidden, steps)?;
        Self::apply_head(&self.head, p, &h)
    }

    pub fn predict(&self, steps: &[Tensor]) -> Result<Tensor> {
        for s in steps {
            if s.shape().len() != 2 || s.cols() != self.input_dim {
                return Err(Error::Shape {
                    op: "lstm_step",
                    lhs: s.shape().to_vec(),
                    rhs: vec![self.input_dim],
                });
            }
        }
        self.forward(&self.params, steps)
    }

    /// Predicts a single window `[T, D]`.
    pub fn predict_window(&self, window: &Tensor) -> Result<f64> {
        if window.shape().len() != 2 || window.rows() == 0 {
            return Err(Error::invalid(format!(
                "window must be non-empty [T, D], got {:?}",
                window.shape()
            )));
        }
        let d = window.cols();
        let steps: Vec<Tensor> = (0..window.rows())
            .map(|t| Tensor::new(vec![1, d], window.data()[t * d..(t + 1) * d].to_vec()))
            .collect::<Result<_>>()?;
        self.predict(&steps)?.item()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::sigmoid;

    fn zero_cell(d: usize, h: usize) -> Vec<Tensor> {
        let mut p = Vec::new();
        for _ in 0..4 {
            p.push(Tensor::zeros(&[d + h, h]));
        }
        for _ in 0..4 {
            p.push(Tensor::zeros(&[1, h]));
        }
        p
    }

    #[test]
    fn zero_cell_stays_zero() {
        let p = zero_cell(1, 3);
        let x = Tensor::full(&[1, 1], 0.7);
        let z = Tensor::zeros(&[1, 3]);
        let (h, c) = Lstm::step(&p, &x, &z, &z).unwrap();
        assert!(h.data().iter().chain(c.data()).all(|v| *v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let mut p = zero_cell(1, 2);
        p[5] = Tensor::full(&[1, 2], 20.0);
        let x = Tensor::full(&[1, 1], 0.3);
        let h = Tensor::zeros(&[1, 2]);
        let c = Tensor::row(vec![0.8, -0.4]);
        let (_, c1) = Lstm::step(&p, &x, &h, &c).unwrap();
        for (a, b) in c1.data().iter().zip(c.data()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn matches_scalar_gates() {
        let (d, hs) = (2, 3);
        let m = Lstm::new(d, hs, Head::Affine, &mut SeedRng::new(4)).unwrap();
        let p = m.params();
        let x = [0.3, -0.2];
        let h = [0.1, 0.5, -0.3];
        let c = [0.2, -0.1, 0.4];
        let (h1, c1) = Lstm::step(
            p,
            &Tensor::row(x.to_vec()),
            &Tensor::row(h.to_vec()),
            &Tensor::row(c.to_vec()),
        )
        .unwrap();
        let xh: Vec<f64> = x.iter().chain(h.iter()).copied().collect();
        for j in 0..hs {
            let pre = |g: usize| {
                (0..d + hs).map(|r| xh[r] * p[g].get(r, j)).sum::<f64>() + p[4 + g].data()[j]
            };
            let i = sigmoid(pre(0));
            let f = sigmoid(pre(1));
            let g = pre(2).tanh();
            let o = sigmoid(pre(3));
            let cj = f * c[j] + i * g;
            assert!((c1.data()[j] - cj).abs() < 1e-12);
            assert!((h1.data()[j] - o * cj.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_model_returns_head_bias() {
        let mut p = zero_cell(1, 4);
        p.push(Tensor::zeros(&[4, 1]));
        p.push(Tensor::full(&[1, 1], 0.625));
        let m = Lstm::from_params(1, 4, Head::Affine, p).unwrap();
        let w = Tensor::new(vec![5, 1], vec![0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert_eq!(m.predict_window(&w).unwrap(), 0.625);
    }

    #[test]
    fn single_step_window_is_head_of_step() {
        let m = Lstm::new(1, 3, Head::Affine, &mut SeedRng::new(2)).unwrap();
        let x = Tensor::full(&[1, 1], 0.4);
        let z = Tensor::zeros(&[1, 3]);
        let (h, _) = Lstm::step(m.params(), &x, &z, &z).unwrap();
        let want = Lstm::apply_head(m.head(), m.params(), &h)
            .unwrap()
            .item()
            .unwrap();
        assert_eq!(m.predict_window(&x).unwrap(), want);
    }

    #[test]
    fn empty_window_is_error() {
        let m = Lstm::new(1, 3, Head::Affine, &mut SeedRng::new(2)).unwrap();
        assert!(m.predict(&[]).is_err());
    }

    #[test]
    fn xnet_head_round_trips_through_from_params() {
        let head = Head::Xnet {
            units: 7,
            init: XNetInit::default(),
        };
        let m = Lstm::new(1, 10, head.clone(), &mut SeedRng::new(1)).unwrap();
        assert_eq!(m.param_names().len(), m.params().len());
        let back = Lstm::from_params(1, 10, head, m.params().to_vec()).unwrap();
        assert_eq!(back, m);
    }
}
