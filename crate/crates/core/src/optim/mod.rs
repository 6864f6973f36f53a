//! Adam and the training loop.

pub mod adam;
pub mod train;

pub use adam::{Adam, AdamConfig};
pub use train::{train, LrSchedule, Refit, Schedule, TrainConfig, TrainOutcome, DIVERGENCE_LIMIT};
