use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("segmentation mask has no foreground pixels")]
    ZeroAreaMask,
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("density maps overlap at row {row}, column {col}")]
    OverlappingSupport { row: usize, col: usize },
    #[error("grayscale scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
    #[error("malformed DMAP data: {0}")]
    Format(String),
    #[error("failed to parse {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("occasion `{occasion}`{}: {reason}", item.map(|i| format!(" item {i}")).unwrap_or_default())]
    Validation {
        occasion: String,
        item: Option<usize>,
        reason: String,
    },
    #[error("need at least {needed} instances to split, got {actual}")]
    TooFewInstances { needed: usize, actual: usize },
    #[error("could not place {shapes} shapes on a {size}x{size} plate after {attempts} attempts")]
    PlacementFailure {
        shapes: usize,
        size: u32,
        attempts: usize,
    },
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("estimator failed on `{occasion}`: {reason}")]
    Estimator { occasion: String, reason: String },
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
