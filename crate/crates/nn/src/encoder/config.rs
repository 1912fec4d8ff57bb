use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning-rate schedule for the encoder optimizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Constant until `start_epoch`, then linear decay reaching zero after
    /// the final epoch.
    LinearDecay { start_epoch: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub image_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Weight of the L1 term in the generator objective.
    pub l1_weight: f64,
    /// kCal per pixel mapped to 1.0. `None` means the training-set maximum.
    pub density_norm: Option<f64>,
    /// Base channel count of the generator.
    pub generator_width: usize,
    /// Base channel count of the discriminator.
    pub discriminator_width: usize,
    pub lr_schedule: LrSchedule,
    /// Write a checkpoint every this many epochs (0 disables).
    pub save_every: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            image_size: 256,
            epochs: 200,
            batch_size: 1,
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            l1_weight: 100.0,
            density_norm: None,
            generator_width: 64,
            discriminator_width: 64,
            lr_schedule: LrSchedule::Constant,
            save_every: 0,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    /// Number of stride-2 stages in the generator: the bottleneck is 4x4.
    pub fn generator_depth(&self) -> usize {
        self.image_size.trailing_zeros() as usize - 2
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !self.image_size.is_power_of_two() || self.image_size < 32 {
            return fail(format!("image_size {} must be a power of two >= 32", self.image_size));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("l1_weight", self.l1_weight),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return fail(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        if let Some(k) = self.density_norm {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::NonPositiveK(k));
            }
        }
        if self.generator_width == 0 || self.discriminator_width == 0 {
            return fail("network widths must be positive".into());
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::LinearDecay { start_epoch } => {
                if epoch < start_epoch || self.epochs <= start_epoch {
                    self.learning_rate
                } else {
                    let span = (self.epochs - start_epoch) as f64;
                    self.learning_rate * (1.0 - (epoch - start_epoch) as f64 / span)
                }
            }
        }
    }
}
