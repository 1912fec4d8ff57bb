//! Per-pixel calorie density maps for food energy estimation.
//!
//! A meal's calories are spread over the pixels of each food item's mask,
//! giving a density map whose cell sum is the meal total. This crate holds
//! the exact map arithmetic, the meal dataset plumbing (manifests, pruning,
//! resizing, splits, flips, synthetic scenes) and the MAE/MAPE evaluation
//! harness. Learned encoders and decoders live in `kcalmap-nn`.

pub mod dataset;
pub mod density;
pub mod dmap;
pub mod error;
pub mod eval;
pub mod flip;
pub mod grayscale;
pub mod mask;
pub mod render;
pub mod seed;

pub use dataset::EatingOccasion;
pub use density::{
    combine_item_densities, generate_item_density, summation_decode, DensityMap,
    FoodItemAnnotation,
};
pub use error::{Error, Result};
pub use flip::{Axis, Flip};
pub use grayscale::{decode_grayscale, encode_grayscale, GrayscaleMap};
pub use mask::SegmentationMask;
pub use render::render_visualization;
