//! Learned components: the conditional-GAN density encoder and the
//! regression calorie decoders used as baselines.

pub mod checkpoint;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod init;
pub mod layers;
pub mod tensor;

pub use checkpoint::{checkpoint_kind, CheckpointKind};
pub use encoder::{train_encoder, EncoderConfig, EncoderModel, LossRecord};
pub use error::{Error, Result};
