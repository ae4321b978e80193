//! Episodic training and evaluation.

mod adam;
mod config;
mod eval;
mod loss;
mod train;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use config::{LossMode, RunConfig};
pub use eval::{evaluate, EvalReport, Prediction};
pub use loss::{compute_loss, emission_loss, query_log_partition, query_loss, EmissionLoss, EpisodeContext};
pub use train::{train, LogEntry, TrainOutcome};
