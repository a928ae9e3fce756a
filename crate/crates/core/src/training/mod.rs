//! Data loading, Adam, and VAE training with an optional coherence penalty.

mod adam;
mod idx;
mod synth;
mod vae;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IMAGE_MAGIC, LABEL_MAGIC};
pub use synth::{synth_dataset, synth_dataset_with_noise, SYNTH_GAIN, SYNTH_NOISE};
pub use vae::{train_vae, Architecture, TrainConfig, VaeModel};

/// Samples in `[0, 1]^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Vec<f64>>,
    pub n: usize,
    pub labels: Option<Vec<u8>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}
