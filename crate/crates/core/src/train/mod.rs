//! Datasets, the squared-error training objective, the ADAM training loop,
//! validation metrics and checkpoint files.

mod checkpoint;
mod config;
mod dataset;
mod trainer;
mod validate;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, PDCK_MAGIC};
pub use config::TrainConfig;
pub use dataset::{build_dataset, DataSource, MaskSpec, Sample};
pub use trainer::{batch_loss, sample_loss, train, EpochRecord, TrainHistory, Trainer};
pub use validate::{validate, MetricStats, Stat, ValidationSummary};

#[cfg(test)]
mod tests;
