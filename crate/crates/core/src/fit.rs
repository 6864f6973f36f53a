//! Function-approximation harness: sample a target, fit a model, score it
//! on a held-out set and, for one- and two-dimensional targets, on a grid.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::linalg::ridge_solve;
use crate::metrics::{compute_metrics, metrics_from_slices, Metrics};
use crate::models::{AnyModel, BSplineFit1D, Mlp, XNet, XNetInit, XNET_LINEAR, XNET_PARAM_NAMES};
use crate::optim::{train, Refit, Schedule, TrainConfig, TrainOutcome};
use crate::reference::references_for;
use crate::report::{RunReport, Table};
use crate::rng::SeedRng;
use crate::targets::{builtin_target, sample_dataset, Dataset, TargetName};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FitModel {
    Xnet {
        units: usize,
        #[serde(default)]
        init: XNetInit,
    },
    Mlp {
        /// Hidden widths only; input and output sizes come from the target.
        hidden: Vec<usize>,
    },
    Bspline {
        grid: usize,
        #[serde(default = "default_degree")]
        degree: usize,
    },
}

fn default_degree() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub target: TargetName,
    pub n_train: usize,
    pub n_test: usize,
    pub model: FitModel,
    /// Relative ridge for the XNet linear solve. With `train` absent the
    /// linear parameters are solved once for the initial features.
    #[serde(default)]
    pub ridge: Option<f64>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    /// Points per axis of the evaluation grid (1-D and 2-D targets only).
    #[serde(default)]
    pub eval_grid: Option<usize>,
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::invalid("n_train and n_test must be positive"));
        }
        if let Some(t) = &self.train {
            t.validate()?;
            if self.ridge.is_some() && t.refit_every == 0 {
                return Err(Error::invalid(
                    "train.refit_every must be positive when ridge is set",
                ));
            }
        }
        let dim = builtin_target(self.target).input_dim;
        if let Some(g) = self.eval_grid {
            if dim > 2 {
                return Err(Error::invalid(format!(
                    "eval_grid needs a 1-D or 2-D target, {} is {dim}-D",
                    self.target.as_str()
                )));
            }
            if g < 2 {
                return Err(Error::invalid("eval_grid needs at least 2 points per axis"));
            }
        }
        match &self.model {
            FitModel::Xnet { units: 0, .. } => Err(Error::invalid("XNet needs at least one unit")),
            FitModel::Xnet { .. } if self.ridge.is_none() && self.train.is_none() => {
                Err(Error::invalid("XNet needs `ridge`, `train`, or both"))
            }
            FitModel::Mlp { hidden } if hidden.contains(&0) => {
                Err(Error::invalid("MLP widths must be positive"))
            }
            FitModel::Mlp { .. } if self.train.is_none() => {
                Err(Error::invalid("MLP needs a `train` section"))
            }
            FitModel::Mlp { .. } if self.ridge.is_some() => {
                Err(Error::invalid("ridge applies to XNet only"))
            }
            FitModel::Bspline { .. } if dim != 1 => Err(Error::invalid(format!(
                "B-spline baseline is 1-D, {} is {dim}-D",
                self.target.as_str()
            ))),
            FitModel::Bspline { .. } if self.train.is_some() || self.ridge.is_some() => {
                Err(Error::invalid("B-spline fit takes no `train` or `ridge`"))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match &self.model {
            FitModel::Xnet { units, .. } => format!("XNet ({units})"),
            FitModel::Mlp { hidden } => format!("MLP {hidden:?}"),
            FitModel::Bspline { grid, degree } => format!("B-spline k={degree}, G={grid}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fitted {
    Net(AnyModel),
    Spline(BSplineFit1D),
}

impl Fitted {
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Fitted::Net(AnyModel::Xnet(m)) => m.predict(x),
            Fitted::Net(AnyModel::Mlp(m)) => m.predict(x),
            Fitted::Net(AnyModel::Lstm(_)) => {
                Err(Error::invalid("sequence models cannot fit point targets"))
            }
            Fitted::Spline(s) => {
                if x.shape().len() != 2 || x.cols() != 1 {
                    return Err(Error::Shape {
                        op: "bspline_eval",
                        lhs: x.shape().to_vec(),
                        rhs: vec![1],
                    });
                }
                Ok(Tensor::column(s.eval_many(x.data())))
            }
        }
    }
}

pub struct FitOutcome {
    pub model: Fitted,
    pub test: Metrics,
    pub grid: Option<Metrics>,
    pub train: Option<TrainOutcome>,
    pub tables: Vec<Table>,
    pub report: RunReport,
}

/// Solves the XNet linear parameters against `data` with the current features.
pub fn refit_xnet(net: &mut XNet, data: &Dataset, ridge: f64) -> Result<()> {
    let phi = net.design_matrix(&data.x)?;
    let beta = ridge_solve(&phi, data.y.data(), ridge)?;
    net.set_linear_params(&beta)
}

fn mse_loss<'g>(pred: Var<'g>, y: &Var<'g>) -> Result<Var<'g>> {
    Ok(pred.sub(y)?.square().mean())
}

fn train_xnet(
    net: XNet,
    data: &Dataset,
    ridge: Option<f64>,
    cfg: Option<&TrainConfig>,
) -> Result<(XNet, Option<TrainOutcome>)> {
    let mut net = net;
    let Some(cfg) = cfg else {
        refit_xnet(&mut net, data, ridge.expect("validated"))?;
        return Ok((net, None));
    };
    let names: Vec<String> = XNET_PARAM_NAMES.iter().map(|s| s.to_string()).collect();
    let mut params = net.into_params();
    let out = match ridge {
        Some(ridge) => {
            let mut frozen = vec![false; names.len()];
            for i in XNET_LINEAR {
                frozen[i] = true;
            }
            let mut refit = |p: &mut [Tensor]| -> Result<()> {
                let mut n = XNet::from_params(p.to_vec())?;
                refit_xnet(&mut n, data, ridge)?;
                p.clone_from_slice(n.params());
                Ok(())
            };
            let refit: &mut Refit = &mut refit;
            train(
                &mut params,
                cfg,
                Schedule {
                    names,
                    frozen,
                    refit: Some(refit),
                },
                |g, v, _| {
                    mse_loss(
                        XNet::forward(v, &g.constant(data.x.clone()))?,
                        &g.constant(data.y.clone()),
                    )
                },
            )?
        }
        None => train(&mut params, cfg, Schedule::adam_only(names), |g, v, _| {
            mse_loss(
                XNet::forward(v, &g.constant(data.x.clone()))?,
                &g.constant(data.y.clone()),
            )
        })?,
    };
    Ok((XNet::from_params(params)?, Some(out)))
}

fn point_table(name: &str, data: &Dataset, pred: &Tensor) -> Table {
    let d = data.x.cols();
    let mut header: Vec<String> = if d <= 2 {
        (0..d).map(|i| format!("x{i}")).collect()
    } else {
        vec!["index".into()]
    };
    header.extend(["actual".into(), "predicted".into(), "difference".into()]);
    let mut t = Table {
        name: name.into(),
        header,
        rows: Vec::with_capacity(data.len()),
    };
    for i in 0..data.len() {
        let mut row: Vec<f64> = if d <= 2 {
            data.x.data()[i * d..(i + 1) * d].to_vec()
        } else {
            vec![i as f64]
        };
        let (a, p) = (data.y.data()[i], pred.data()[i]);
        row.extend([a, p, p - a]);
        t.rows.push(row);
    }
    t
}

pub fn run_fit(experiment: &str, cfg: &FitConfig, seed: u64) -> Result<FitOutcome> {
    cfg.validate()?;
    let target = builtin_target(cfg.target);
    let (train_set, test_set) = sample_dataset(&target, cfg.n_train, cfg.n_test, seed)?;
    let mut rng = SeedRng::new(seed).split().split().split();

    let started = Instant::now();
    let (model, train_out) = match &cfg.model {
        FitModel::Xnet { units, init } => {
            let net = XNet::new(target.input_dim, *units, init, &mut rng)?;
            let (net, out) = train_xnet(net, &train_set, cfg.ridge, cfg.train.as_ref())?;
            (Fitted::Net(AnyModel::Xnet(net)), out)
        }
        FitModel::Mlp { hidden } => {
            let mut widths = vec![target.input_dim];
            widths.extend(hidden);
            widths.push(1);
            let net = Mlp::new(&widths, &mut rng)?;
            let names = net.param_names();
            let mut params = net.into_params();
            let tc = cfg.train.as_ref().expect("validated");
            let out = train(&mut params, tc, Schedule::adam_only(names), |g, v, _| {
                mse_loss(
                    Mlp::forward(v, &g.constant(train_set.x.clone()))?,
                    &g.constant(train_set.y.clone()),
                )
            })?;
            (
                Fitted::Net(AnyModel::Mlp(Mlp::from_params(&widths, params)?)),
                Some(out),
            )
        }
        FitModel::Bspline { grid, degree } => {
            let (lo, hi) = target.domain[0];
            let s = BSplineFit1D::fit_on(
                train_set.x.data(),
                train_set.y.data(),
                lo,
                hi,
                *grid,
                *degree,
            )?;
            (Fitted::Spline(s), None)
        }
    };
    let elapsed = started.elapsed().as_secs_f64();

    let test_pred = model.predict(&test_set.x)?;
    let test = compute_metrics(&test_pred, &test_set.y, elapsed)?;
    let train_pred = model.predict(&train_set.x)?;
    let train_metrics = compute_metrics(&train_pred, &train_set.y, elapsed)?;
    let mut tables = vec![point_table("test", &test_set, &test_pred)];

    let grid = match cfg.eval_grid {
        Some(n) => {
            let g = target.grid(n)?;
            let pred = model.predict(&g.x)?;
            tables.push(point_table("grid", &g, &pred));
            Some(metrics_from_slices(pred.data(), g.y.data(), elapsed)?)
        }
        None => None,
    };

    let mut report = RunReport::new(experiment, "fit", seed, serde_json::to_value(cfg)?, test);
    report.extra.insert("train".into(), train_metrics);
    if let Some(g) = grid {
        report.extra.insert("grid".into(), g);
    }
    if let Some(out) = &train_out {
        report.history = out.history.clone();
        report.values.insert("final_loss".into(), out.final_loss);
    }
    if let Fitted::Net(m) = &model {
        report.values.insert(
            "param_count".into(),
            m.params().iter().map(Tensor::len).sum::<usize>() as f64,
        );
    }
    report.references = references_for(cfg.target.as_str());
    Ok(FitOutcome {
        model,
        test,
        grid,
        train: train_out,
        tables,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::AdamConfig;

    fn cfg(model: FitModel) -> FitConfig {
        FitConfig {
            target: TargetName::Xy,
            n_train: 200,
            n_test: 100,
            model,
            ridge: None,
            train: None,
            eval_grid: Some(5),
        }
    }

    #[test]
    fn random_feature_solve_fits_a_product() {
        let mut c = cfg(FitModel::Xnet {
            units: 100,
            init: XNetInit::default(),
        });
        c.ridge = Some(1e-12);
        let out = run_fit("xy", &c, 1).unwrap();
        assert!(out.test.mse < 1e-6, "{}", out.test.mse);
        assert_eq!(out.tables[1].rows.len(), 25);
        assert!(out.report.metrics_consistent());
    }

    #[test]
    fn variable_projection_run_is_deterministic() {
        let mut c = cfg(FitModel::Xnet {
            units: 10,
            init: XNetInit::default(),
        });
        c.ridge = Some(1e-10);
        c.train = Some(TrainConfig {
            iterations: 30,
            log_every: 10,
            refit_every: 10,
            ..Default::default()
        });
        let a = run_fit("a", &c, 3).unwrap();
        let b = run_fit("a", &c, 3).unwrap();
        assert_eq!(a.report.without_timing(), b.report.without_timing());
        assert_eq!(a.report.history.len(), 3);
    }

    #[test]
    fn mlp_trains() {
        let mut c = cfg(FitModel::Mlp { hidden: vec![8] });
        c.train = Some(TrainConfig {
            iterations: 200,
            adam: AdamConfig {
                lr: 1e-2,
                ..Default::default()
            },
            ..Default::default()
        });
        let out = run_fit("m", &c, 2).unwrap();
        let h = &out.train.unwrap().history;
        assert!(h.last().unwrap().1 < 0.5 * h[0].1);
    }

    #[test]
    fn bspline_baseline_on_heaviside() {
        let c = FitConfig {
            target: TargetName::Heaviside,
            n_train: 2000,
            n_test: 500,
            model: FitModel::Bspline {
                grid: 50,
                degree: 3,
            },
            ridge: None,
            train: None,
            eval_grid: Some(101),
        };
        let out = run_fit("b", &c, 4).unwrap();
        assert!(out.test.mse < 1e-2 && out.test.mse > 0.0);
    }

    #[test]
    fn invalid_combinations() {
        let c = cfg(FitModel::Bspline {
            grid: 10,
            degree: 3,
        });
        assert!(c.validate().is_err());
        let c = cfg(FitModel::Xnet {
            units: 5,
            init: XNetInit::default(),
        });
        assert!(c.validate().is_err());
        let mut c = cfg(FitModel::Mlp { hidden: vec![4] });
        c.target = TargetName::Exp4d;
        c.train = Some(TrainConfig::default());
        assert!(c.validate().is_err(), "grid on a 4-D target");
    }
}
