use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("training diverged at epoch {epoch}, step {step}: {what} is not finite")]
    Divergence {
        epoch: usize,
        step: usize,
        what: &'static str,
    },
    #[error("shape mismatch: model expects {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("density normalization constant must be positive, got {0}")]
    NonPositiveK(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Core(#[from] kcalmap_core::Error),
    #[error(transparent)]
    Candle(#[from] candle_core::Error),
    #[error(transparent)]
    SafeTensors(#[from] safetensors::SafeTensorError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<Error> for kcalmap_core::Error {
    fn from(e: Error) -> Self {
        match e {
            Error::Core(inner) => inner,
            other => kcalmap_core::Error::Estimator {
                occasion: String::new(),
                reason: other.to_string(),
            },
        }
    }
}
