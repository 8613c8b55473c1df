use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mri::DEFAULT_CENTER_FRACTION;
use crate::nets::Variant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub accel: f64,
    pub center_fraction: f64,
    pub noise_sigma: f64,
    pub image_size: usize,
    /// Phantoms before augmentation.
    pub base_images: usize,
    /// The first `train_count` samples train, the next `val_count` validate.
    pub train_count: usize,
    pub val_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Pd,
            epochs: 50,
            batch_size: 4,
            learning_rate: 1e-3,
            seed: 0,
            accel: 6.0,
            center_fraction: DEFAULT_CENTER_FRACTION,
            noise_sigma: 0.005,
            image_size: 64,
            base_images: 200,
            train_count: 1400,
            val_count: 200,
        }
    }
}

impl TrainConfig {
    pub fn with_variant(variant: Variant) -> Self {
        TrainConfig { variant, ..Default::default() }
    }

    /// Steps per epoch: `⌈train_count / batch_size⌉`.
    pub fn steps_per_epoch(&self) -> usize {
        self.train_count.div_ceil(self.batch_size)
    }

    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if dataset_len == 0 {
            return bad("dataset is empty".into());
        }
        if self.train_count == 0 || self.val_count == 0 || self.batch_size == 0 {
            return bad(format!(
                "train count, validation count and batch size must be positive (got {}, {}, {})",
                self.train_count, self.val_count, self.batch_size
            ));
        }
        if self.train_count + self.val_count > dataset_len {
            return bad(format!(
                "{} training + {} validation samples exceed the dataset size {dataset_len}",
                self.train_count, self.val_count
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be finite and >= 0, got {}", self.learning_rate));
        }
        Ok(())
    }
}
