//! End-to-end training and count metrics.

mod metrics;
mod trainer;

pub use metrics::{count_metrics, evaluate, predict_counts, CountMetrics};
pub use trainer::{train, train_with_hook, EpochRecord, Sample, TrainConfig, TrainLog};
