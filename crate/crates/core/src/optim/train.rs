//! Generic training loop.
//!
//! The loop rebuilds a [`Graph`] each step, asks the caller for a scalar loss
//! over the current parameters, and applies an Adam update. Parameters the
//! output depends on linearly can be handed to a `refit` callback instead,
//! which re-solves them exactly between gradient steps.

use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::optim::adam::{Adam, AdamConfig};
use crate::tensor::Tensor;

/// Loss above which a run counts as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    Constant,
    /// Multiply the rate by `factor` every `every` steps.
    StepDecay {
        every: usize,
        factor: f64,
    },
    /// Half-cosine from the base rate down to `final_factor` times it.
    Cosine {
        final_factor: f64,
    },
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule::Constant
    }
}

impl LrSchedule {
    pub fn rate(&self, base: f64, step: usize, total: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::StepDecay { every, factor } => {
                base * factor.powi((step / every.max(1)) as i32)
            }
            LrSchedule::Cosine { final_factor } => {
                let frac = step as f64 / total.max(1) as f64;
                base * (final_factor + (1.0 - final_factor) * 0.5 * (1.0 + (PI * frac).cos()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: usize,
    #[serde(flatten)]
    pub adam: AdamConfig,
    pub schedule: LrSchedule,
    /// Record the loss every this many steps.
    pub log_every: usize,
    /// Re-solve the linear parameters every this many steps (0 = never).
    pub refit_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            adam: AdamConfig::default(),
            schedule: LrSchedule::Constant,
            log_every: 10,
            refit_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be positive"));
        }
        if self.log_every == 0 {
            return Err(Error::invalid("log_every must be positive"));
        }
        if let LrSchedule::StepDecay { every: 0, .. } = self.schedule {
            return Err(Error::invalid("step decay interval must be positive"));
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// `(step, loss)` pairs, one per `log_every` steps.
    pub history: Vec<(usize, f64)>,
    pub final_loss: f64,
    pub wall_time_s: f64,
}

/// Hook that overwrites parameters in place, e.g. a least-squares solve.
pub type Refit<'a> = dyn FnMut(&mut [Tensor]) -> Result<()> + 'a;

/// Which parameters the optimizer updates, and an optional exact solve for the rest.
pub struct Schedule<'a> {
    pub names: Vec<String>,
    /// Parameters skipped by Adam (owned by `refit`).
    pub frozen: Vec<bool>,
    pub refit: Option<&'a mut Refit<'a>>,
}

impl<'a> Schedule<'a> {
    pub fn adam_only(names: Vec<String>) -> Self {
        Self {
            frozen: vec![false; names.len()],
            names,
            refit: None,
        }
    }
}

/// Runs `cfg.iterations` steps. `loss_fn(graph, vars, step)` must return a
/// scalar built from `vars`, which mirror `params`.
pub fn train<F>(
    params: &mut [Tensor],
    cfg: &TrainConfig,
    mut sched: Schedule<'_>,
    mut loss_fn: F,
) -> Result<TrainOutcome>
where
    F: for<'g> FnMut(&'g Graph, &[Var<'g>], usize) -> Result<Var<'g>>,
{
    cfg.validate()?;
    let mut opt = Adam::new(cfg.adam.clone(), params);
    let mut history = Vec::with_capacity(cfg.iterations / cfg.log_every);
    let started = Instant::now();
    let mut last = f64::NAN;
    for step in 0..cfg.iterations {
        if let Some(refit) = sched.refit.as_mut() {
            if cfg.refit_every > 0 && step % cfg.refit_every == 0 {
                refit(params)?;
            }
        }
        let g = Graph::new();
        let vars = g.params(params);
        let loss = loss_fn(&g, &vars, step)?;
        let value = loss.value().item()?;
        if (step + 1) % cfg.log_every == 0 {
            history.push((step + 1, value));
        }
        if !(value <= DIVERGENCE_LIMIT) {
            return Err(Error::Diverged {
                step,
                loss: value,
                history,
            });
        }
        let grads = g.backward(loss)?.wrt_all(&vars);
        let lr = cfg.schedule.rate(cfg.adam.lr, step, cfg.iterations);
        opt.step(params, &grads, lr, &sched.names, &sched.frozen)?;
        last = value;
    }
    if let Some(refit) = sched.refit.as_mut() {
        refit(params)?;
    }
    Ok(TrainOutcome {
        history,
        final_loss: last,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(iterations: usize, log_every: usize) -> (Vec<Tensor>, TrainOutcome) {
        let mut p = vec![Tensor::scalar(0.0)];
        let cfg = TrainConfig {
            iterations,
            adam: AdamConfig {
                lr: 0.1,
                ..Default::default()
            },
            log_every,
            ..Default::default()
        };
        let out = train(
            &mut p,
            &cfg,
            Schedule::adam_only(vec!["p".into()]),
            |_, v, _| Ok(v[0].add_scalar(-3.0).square()),
        )
        .unwrap();
        (p, out)
    }

    #[test]
    fn converges_on_quadratic_bowl() {
        let (p, out) = bowl(500, 1);
        assert!((p[0].item().unwrap() - 3.0).abs() < 1e-3);
        assert_eq!(out.history.len(), 500);
    }

    #[test]
    fn bowl_loss_does_not_climb_over_windows() {
        let (_, out) = bowl(500, 50);
        for w in out.history.windows(2) {
            assert!(w[1].1 <= w[0].1 * 1.1, "{:?} -> {:?}", w[0], w[1]);
        }
    }

    #[test]
    fn history_length_and_determinism() {
        let run = || {
            let mut p = vec![Tensor::row(vec![0.5, -0.5])];
            let cfg = TrainConfig {
                iterations: 95,
                log_every: 10,
                ..Default::default()
            };
            train(
                &mut p,
                &cfg,
                Schedule::adam_only(vec!["p".into()]),
                |_, v, _| Ok(v[0].sin().square().sum()),
            )
            .unwrap()
        };
        let a = run();
        assert_eq!(a.history.len(), 9);
        assert_eq!(a.history, run().history);
    }

    #[test]
    fn divergence_is_reported_with_history() {
        let mut p = vec![Tensor::scalar(1.0)];
        let cfg = TrainConfig {
            iterations: 100,
            log_every: 1,
            ..Default::default()
        };
        let err = train(
            &mut p,
            &cfg,
            Schedule::adam_only(vec!["p".into()]),
            |_, v, step| Ok(v[0].scale(10f64.powi(step as i32))),
        )
        .unwrap_err();
        match err {
            Error::Diverged { step, history, .. } => {
                assert!(step > 10);
                assert_eq!(history.len(), step + 1);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn refit_owns_frozen_params() {
        // loss = (a - 2)^2 + (b - a)^2 with b solved exactly as b = a.
        let mut p = vec![Tensor::scalar(0.0), Tensor::scalar(0.0)];
        let mut refit = |p: &mut [Tensor]| -> Result<()> {
            p[1] = p[0].clone();
            Ok(())
        };
        let sched = Schedule {
            names: vec!["a".into(), "b".into()],
            frozen: vec![false, true],
            refit: Some(&mut refit),
        };
        let cfg = TrainConfig {
            iterations: 400,
            adam: AdamConfig {
                lr: 0.05,
                ..Default::default()
            },
            refit_every: 1,
            ..Default::default()
        };
        train(&mut p, &cfg, sched, |_, v, _| {
            Ok(v[0]
                .add_scalar(-2.0)
                .square()
                .add(&v[1].sub(&v[0])?.square())?)
        })
        .unwrap();
        assert!((p[0].item().unwrap() - 2.0).abs() < 1e-2);
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn schedules() {
        let s = LrSchedule::StepDecay {
            every: 10,
            factor: 0.5,
        };
        assert_eq!(s.rate(1.0, 25, 100), 0.25);
        let c = LrSchedule::Cosine { final_factor: 0.1 };
        assert_eq!(c.rate(1.0, 0, 100), 1.0);
        assert!((c.rate(1.0, 100, 100) - 0.1).abs() < 1e-15);
    }
}
