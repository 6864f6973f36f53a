//! One-step-ahead forecasting with LSTM and XLSTM (LSTM with an XNet readout).
//!
//! Models train on windows whose target lies in the training prefix. Test
//! predictions are teacher forced: every test window holds true history,
//! never earlier predictions.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::linalg::ridge_solve;
use crate::metrics::{metrics_from_slices, Metrics};
use crate::models::lstm::{Head, Lstm};
use crate::models::{XNet, XNET_LINEAR};
use crate::optim::{train, Refit, Schedule, TrainConfig};
use crate::reference::{references_for, ReferenceRow};
use crate::report::Table;
use crate::rng::SeedRng;
use crate::targets::{make_windows, Split, WindowDataset};
use crate::tensor::Tensor;

/// Index of the first head parameter in an LSTM parameter list.
const HEAD_START: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastConfig {
    /// Row label in comparison tables, e.g. `"LSTM"`.
    pub label: String,
    pub window: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    pub head: Head,
    #[serde(default)]
    pub normalize: bool,
    /// Relative ridge for solving the XNet head's linear parameters on the
    /// final hidden states. XNet heads only.
    #[serde(default)]
    pub head_ridge: Option<f64>,
    pub train: TrainConfig,
}

fn default_hidden() -> usize {
    10
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.hidden == 0 {
            return Err(Error::invalid("window and hidden size must be at least 1"));
        }
        self.train.validate()?;
        match (&self.head, self.head_ridge) {
            (Head::Affine, Some(_)) => Err(Error::invalid("head_ridge needs an XNet head")),
            (Head::Xnet { units: 0, .. }, _) => {
                Err(Error::invalid("XNet head needs at least one unit"))
            }
            (Head::Xnet { .. }, Some(_)) if self.train.refit_every == 0 => Err(Error::invalid(
                "train.refit_every must be positive when head_ridge is set",
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub label: String,
    /// Series index of each test target.
    pub index: Vec<usize>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
    pub metrics: Metrics,
    pub history: Vec<(usize, f64)>,
    pub seed: u64,
}

/// Refits the XNet head's linear parameters against the training targets,
/// holding the recurrent weights and the head's features fixed.
fn refit_head(
    p: &mut [Tensor],
    hidden: usize,
    steps: &[Tensor],
    targets: &Tensor,
    ridge: f64,
) -> Result<()> {
    let h = Lstm::final_hidden(p, hidden, steps)?;
    let mut head = XNet::from_params(p[HEAD_START..].to_vec())?;
    let phi = head.design_matrix(&h)?;
    let beta = ridge_solve(&phi, targets.data(), ridge)?;
    head.set_linear_params(&beta)?;
    p[HEAD_START..].clone_from_slice(head.params());
    Ok(())
}

fn window_loss<'g>(
    g: &'g Graph,
    v: &[Var<'g>],
    head: &Head,
    hidden: usize,
    steps: &[Tensor],
    targets: &Tensor,
) -> Result<Var<'g>> {
    let xs: Vec<_> = steps.iter().map(|s| g.constant(s.clone())).collect();
    let h = Lstm::final_hidden(v, hidden, &xs)?;
    Ok(Lstm::apply_head(head, v, &h)?
        .sub(&g.constant(targets.clone()))?
        .square()
        .mean())
}

pub fn train_forecaster(
    ds: &WindowDataset,
    cfg: &ForecastConfig,
    seed: u64,
) -> Result<(Lstm, Vec<(usize, f64)>)> {
    cfg.validate()?;
    if ds.split == 0 {
        return Err(Error::invalid("no training windows before the split"));
    }
    let mut rng = SeedRng::new(seed);
    let model = Lstm::new(1, cfg.hidden, cfg.head.clone(), &mut rng)?;
    let names = model.param_names();
    let mut params = model.params().to_vec();
    let steps = ds.steps(ds.train_range());
    let targets = ds.targets_in(ds.train_range());
    let head = cfg.head.clone();
    let hidden = cfg.hidden;
    let out = match cfg.head_ridge {
        Some(ridge) => {
            let mut frozen = vec![false; names.len()];
            for i in XNET_LINEAR {
                frozen[HEAD_START + i] = true;
            }
            let mut refit = |p: &mut [Tensor]| refit_head(p, hidden, &steps, &targets, ridge);
            let refit: &mut Refit = &mut refit;
            train(
                &mut params,
                &cfg.train,
                Schedule {
                    names,
                    frozen,
                    refit: Some(refit),
                },
                |g, v, _| window_loss(g, v, &head, hidden, &steps, &targets),
            )?
        }
        None => train(
            &mut params,
            &cfg.train,
            Schedule::adam_only(names),
            |g, v, _| window_loss(g, v, &head, hidden, &steps, &targets),
        )?,
    };
    let model = Lstm::from_params(1, cfg.hidden, cfg.head.clone(), params)?;
    Ok((model, out.history))
}

/// Predictions for every test window, denormalized to the series scale.
pub fn predict_test(model: &Lstm, ds: &WindowDataset) -> Result<Vec<f64>> {
    let raw = model.predict(&ds.steps(ds.test_range()))?;
    Ok(raw.data().iter().map(|&v| ds.denormalize(v)).collect())
}

pub fn run_forecast(
    series: &[f64],
    split: Split,
    cfg: &ForecastConfig,
    seed: u64,
) -> Result<ForecastResult> {
    cfg.validate()?;
    if series.len() <= cfg.window + 1 {
        return Err(Error::invalid(format!(
            "series of length {} is too short for window {}",
            series.len(),
            cfg.window
        )));
    }
    let ds = make_windows(series, cfg.window, split, cfg.normalize)?;
    if ds.test_range().is_empty() {
        return Err(Error::invalid("no test targets after the split"));
    }
    let started = Instant::now();
    let (model, history) = train_forecaster(&ds, cfg, seed)?;
    let elapsed = started.elapsed().as_secs_f64();
    let predicted = predict_test(&model, &ds)?;
    let index = ds.target_index[ds.test_range()].to_vec();
    let actual: Vec<f64> = index.iter().map(|&i| series[i]).collect();
    let metrics = metrics_from_slices(&predicted, &actual, elapsed)?;
    Ok(ForecastResult {
        label: cfg.label.clone(),
        index,
        actual,
        predicted,
        metrics,
        history,
        seed,
    })
}

/// Per-run seed derived from the base seed and the configuration itself, so
/// identical configurations reproduce each other and distinct ones do not
/// share a stream.
pub fn derive_seed(base: u64, cfg: &ForecastConfig) -> Result<u64> {
    let text = serde_json::to_string(cfg)?;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    Ok(base ^ h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ForecastResult>,
    pub references: Vec<ReferenceRow>,
}

impl Comparison {
    /// `index, actual, <label>...` with one prediction column per model.
    pub fn predictions_table(&self) -> Table {
        let mut header = vec!["index".to_string(), "actual".to_string()];
        header.extend(self.rows.iter().map(|r| r.label.clone()));
        let mut t = Table {
            name: "predictions".into(),
            header,
            rows: Vec::new(),
        };
        if let Some(first) = self.rows.first() {
            for (k, (&i, &a)) in first.index.iter().zip(&first.actual).enumerate() {
                let mut row = vec![i as f64, a];
                row.extend(self.rows.iter().map(|r| r.predicted[k]));
                t.rows.push(row);
            }
        }
        t
    }

    pub fn mse_of(&self, label: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.label == label)
            .map(|r| r.metrics.mse)
    }
}

/// Runs each configuration on the same series, one thread per model.
/// `reference_group` selects which published rows to attach.
pub fn compare_models(
    series: &[f64],
    split: Split,
    cfgs: &[ForecastConfig],
    seed: u64,
    reference_group: Option<&str>,
) -> Result<Comparison> {
    if cfgs.len() < 2 {
        return Err(Error::invalid(
            "a comparison needs at least two model configurations",
        ));
    }
    for c in cfgs {
        c.validate()?;
    }
    let seeds: Vec<u64> = cfgs
        .iter()
        .map(|c| derive_seed(seed, c))
        .collect::<Result<_>>()?;
    let rows = std::thread::scope(|s| {
        let handles: Vec<_> = cfgs
            .iter()
            .zip(&seeds)
            .map(|(c, &sd)| s.spawn(move || run_forecast(series, split, c, sd)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("forecast thread panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    let references = reference_group.map(references_for).unwrap_or_default();
    Ok(Comparison { rows, references })
}
