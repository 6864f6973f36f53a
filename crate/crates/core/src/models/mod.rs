//! Network definitions and baselines.

pub mod bspline;
pub mod cauchy;
pub mod checkpoint;
pub mod lstm;
pub mod mlp;
pub mod xnet;

pub use bspline::BSplineFit1D;
pub use cauchy::{cauchy_eval, CauchyParams, D_MIN};
pub use checkpoint::{AnyModel, Checkpoint, ModelConfig};
pub use lstm::{Head, Lstm};
pub use mlp::Mlp;
pub use xnet::{XNet, XNetInit, XNET_LINEAR, XNET_PARAM_NAMES};
