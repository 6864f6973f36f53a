//! Cauchy-activation networks (XNet) with a small define-by-run autodiff
//! engine, baselines, physics-informed training and time-series experiments.

pub mod autodiff;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod pinn;
pub mod reference;
pub mod report;
pub mod rng;
pub mod targets;
pub mod tensor;
pub mod timeseries;

pub use autodiff::{Array, Dual, Graph, Var};
pub use error::{Error, Result};
pub use metrics::{compute_metrics, Metrics};
pub use report::{emit_report, RunReport};
pub use rng::SeedRng;
pub use tensor::Tensor;
