//! Image-to-density encoder trained as a conditional GAN.

mod config;
mod discriminator;
mod generator;
mod normalize;
mod train;

pub use config::{EncoderConfig, LrSchedule};
pub use discriminator::Discriminator;
pub use generator::Generator;
pub use normalize::{denormalize_density, max_density, normalize_density};
pub use train::{epoch_means, train_encoder, train_encoder_with, write_history_csv, EpochSummary, LossRecord};

use std::path::Path;

use candle_core::{DType, Device, Tensor};
use candle_nn::{VarBuilder, VarMap};
use image::RgbImage;
use kcalmap_core::eval::DensityEncoder;
use kcalmap_core::seed::derive_seed;
use kcalmap_core::{DensityMap, EatingOccasion};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{read_checkpoint, write_checkpoint, CheckpointKind};
use crate::error::{Error, Result};
use crate::init::{reinit_vars, snapshot, ParamInit};
use crate::tensor::image_to_tensor;

/// Gaussian weights around zero for convolutions, around one for norm
/// gains, zero biases.
fn gan_init(name: &str, dims: &[usize]) -> ParamInit {
    if name.ends_with(".bias") {
        ParamInit::Const(0.0)
    } else if dims.len() == 1 {
        ParamInit::Normal { mean: 1.0, std: 0.02 }
    } else {
        ParamInit::Normal { mean: 0.0, std: 0.02 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EncoderMeta {
    config: EncoderConfig,
    density_norm: f64,
    epochs_trained: usize,
    history: Vec<LossRecord>,
}

pub struct EncoderModel {
    config: EncoderConfig,
    density_norm: f64,
    epochs_trained: usize,
    history: Vec<LossRecord>,
    gen_vars: VarMap,
    disc_vars: VarMap,
    generator: Generator,
    discriminator: Discriminator,
}

impl std::fmt::Debug for EncoderModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EncoderModel")
            .field("config", &self.config)
            .field("density_norm", &self.density_norm)
            .field("epochs_trained", &self.epochs_trained)
            .finish_non_exhaustive()
    }
}

impl EncoderModel {
    /// Freshly initialized networks, seeded from `config.seed`.
    pub fn new(config: EncoderConfig, density_norm: f64) -> Result<Self> {
        config.validate()?;
        if !(density_norm.is_finite() && density_norm > 0.0) {
            return Err(Error::NonPositiveK(density_norm));
        }
        let gen_vars = VarMap::new();
        let disc_vars = VarMap::new();
        let generator = Generator::new(
            config.generator_depth(),
            config.generator_width,
            VarBuilder::from_varmap(&gen_vars, DType::F32, &Device::Cpu),
        )?;
        let discriminator = Discriminator::new(
            config.discriminator_width,
            VarBuilder::from_varmap(&disc_vars, DType::F32, &Device::Cpu),
        )?;
        reinit_vars(&gen_vars, derive_seed(config.seed, "generator", 0), gan_init)?;
        reinit_vars(&disc_vars, derive_seed(config.seed, "discriminator", 0), gan_init)?;
        Ok(Self {
            config,
            density_norm,
            epochs_trained: 0,
            history: Vec::new(),
            gen_vars,
            disc_vars,
            generator,
            discriminator,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// kCal per pixel represented by a generator output of 1.
    pub fn density_norm(&self) -> f64 {
        self.density_norm
    }

    pub fn epochs_trained(&self) -> usize {
        self.epochs_trained
    }

    pub fn history(&self) -> &[LossRecord] {
        &self.history
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.discriminator
    }

    /// Copies of the generator weights, sorted by name.
    pub fn generator_parameters(&self) -> Result<Vec<(String, Tensor)>> {
        snapshot(&self.gen_vars)
    }

    fn expected_shape(&self) -> (usize, usize) {
        (self.config.image_size, self.config.image_size)
    }

    /// Generator output in unit range, `(N, 1, S, S)`.
    pub fn forward(&self, images: &Tensor) -> Result<Tensor> {
        Ok(self.generator.forward(images)?)
    }

    /// Predicted kCal-per-pixel map for one image of the training size.
    pub fn predict_density(&self, image: &RgbImage) -> Result<DensityMap> {
        let shape = (image.height() as usize, image.width() as usize);
        if shape != self.expected_shape() {
            return Err(Error::ShapeMismatch {
                expected: self.expected_shape(),
                actual: shape,
            });
        }
        let x = image_to_tensor(image, &Device::Cpu)?;
        let y = self.forward(&x)?;
        let grid: Vec<f32> = y.flatten_all()?.to_vec1()?;
        denormalize_density(&grid, shape, self.density_norm)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = EncoderMeta {
            config: self.config.clone(),
            density_norm: self.density_norm,
            epochs_trained: self.epochs_trained,
            history: self.history.clone(),
        };
        write_checkpoint(
            path,
            CheckpointKind::Encoder,
            &[("generator", &self.gen_vars), ("discriminator", &self.disc_vars)],
            &meta,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt = read_checkpoint::<EncoderMeta>(path, CheckpointKind::Encoder)?;
        let meta = ckpt.meta.clone();
        let mut model = Self::new(meta.config, meta.density_norm)?;
        ckpt.restore_into("generator", &model.gen_vars)?;
        if ckpt.has_group("discriminator") {
            ckpt.restore_into("discriminator", &model.disc_vars)?;
        }
        model.epochs_trained = meta.epochs_trained;
        model.history = meta.history;
        Ok(model)
    }
}

impl DensityEncoder for EncoderModel {
    fn encode(&self, occasion: &EatingOccasion) -> kcalmap_core::Result<DensityMap> {
        self.predict_density(occasion.image()).map_err(|e| match e {
            Error::Core(inner) => inner,
            other => kcalmap_core::Error::Estimator {
                occasion: occasion.id().to_string(),
                reason: other.to_string(),
            },
        })
    }
}
