//! The rating predictors and their full-batch trainer.

mod config;
pub mod objective;
mod train;

pub use config::{ModelKind, PenaltyScaling, TrainConfig};
pub use objective::{gradients, interest_cross_term, objective, Evaluator, Gradients};
pub use train::{fit, fit_from, implicit_sums, predict, TrainedModel};
