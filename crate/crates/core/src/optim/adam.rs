//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid Adam settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        let zeros = |p: &Tensor| Tensor::zeros(p.shape());
        Self {
            config,
            t: 0,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
        }
    }

    /// Number of completed steps.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// One update with learning rate `lr`. Parameters whose `skip` flag is set
    /// keep their values and moments.
    pub fn step(
        &mut self,
        params: &mut [Tensor],
        grads: &[Tensor],
        lr: f64,
        names: &[String],
        skip: &[bool],
    ) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::invalid(
                "Adam: parameter and gradient lists differ in length",
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return Err(Error::Shape {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
            if !g.all_finite() {
                let param = names.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
                return Err(Error::NonFiniteGradient {
                    step: self.t as usize + 1,
                    param,
                });
            }
        }
        self.t += 1;
        let AdamConfig {
            beta1, beta2, eps, ..
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (i, p) in params.iter_mut().enumerate() {
            if skip.get(i).copied().unwrap_or(false) {
                continue;
            }
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (j, x) in p.data_mut().iter_mut().enumerate() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                *x -= lr * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![Tensor::row(vec![1.0, -2.0])];
        let mut opt = Adam::new(AdamConfig::default(), &p);
        opt.step(&mut p, &[Tensor::zeros(&[1, 2])], 1e-3, &[], &[])
            .unwrap();
        assert_eq!(p[0].data(), &[1.0, -2.0]);
        assert_eq!(opt.t(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![Tensor::row(vec![0.0, 5.0])];
        let mut opt = Adam::new(
            AdamConfig {
                lr: 0.1,
                ..Default::default()
            },
            &p,
        );
        opt.step(&mut p, &[Tensor::row(vec![1.0, 1.0])], 0.1, &[], &[])
            .unwrap();
        for (x, x0) in p[0].data().iter().zip([0.0, 5.0]) {
            assert!((x - x0 + 0.1).abs() < 1e-8);
        }
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut p = vec![Tensor::scalar(1.0), Tensor::scalar(2.0)];
        let mut opt = Adam::new(AdamConfig::default(), &p);
        let names = vec!["a".to_string(), "bias".to_string()];
        let err = opt
            .step(
                &mut p,
                &[Tensor::scalar(0.0), Tensor::scalar(f64::NAN)],
                1e-3,
                &names,
                &[],
            )
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { step: 1, ref param } if param == "bias"));
    }

    #[test]
    fn skipped_params_are_frozen() {
        let mut p = vec![Tensor::scalar(1.0), Tensor::scalar(2.0)];
        let mut opt = Adam::new(AdamConfig::default(), &p);
        let g = [Tensor::scalar(1.0), Tensor::scalar(1.0)];
        opt.step(&mut p, &g, 0.1, &[], &[false, true]).unwrap();
        assert!(p[0].data()[0] < 1.0);
        assert_eq!(p[1].data()[0], 2.0);
    }
}
