//! Optimizer, training loop, and evaluation metrics.

mod adam;
mod metrics;
mod trainer;

pub use adam::{adam_step, AdamState, DEFAULT_LR};
pub use metrics::{auc, logloss, rela_imp};
pub use trainer::{train, train_with, EpochRecord, TrainConfig, TrainHistory, TrainOutcome};
