//! Eating occasions and everything needed to get them off disk, cleaned,
//! split and augmented.

mod augment;
mod manifest;
mod prune;
mod regularize;
mod split;
mod synth;

pub use augment::augment_fourfold;
pub use manifest::{
    load_manifest, read_raw_manifest, save_manifest, ManifestDoc, ManifestItem,
    ManifestOccasion, RawItem, RawOccasion, MANIFEST_FILE, MANIFEST_VERSION,
};
pub use prune::{prune, PrunePolicy, Rejection, RejectionReason};
pub use regularize::{regularize_image, DEFAULT_IMAGE_SIZE};
pub use split::{split, split_with, DatasetSplit, SplitRatios};
pub use synth::{
    generate_synthetic, item_kcal, FoodClass, ShapeKind, SyntheticSceneConfig,
};

use image::RgbImage;

use crate::density::{combine_item_densities, generate_item_density, DensityMap, FoodItemAnnotation};
use crate::error::{Error, Result};

/// One meal photo with its per-item annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct EatingOccasion {
    id: String,
    image: RgbImage,
    items: Vec<FoodItemAnnotation>,
}

impl EatingOccasion {
    /// Validates shapes, item calories, mask areas and mask disjointness.
    pub fn new(id: impl Into<String>, image: RgbImage, items: Vec<FoodItemAnnotation>) -> Result<Self> {
        let id = id.into();
        let fail = |item: Option<usize>, reason: String| Error::Validation {
            occasion: id.clone(),
            item,
            reason,
        };
        if items.is_empty() {
            return Err(fail(None, "no food items".into()));
        }
        let shape = (image.height() as usize, image.width() as usize);
        for (i, item) in items.iter().enumerate() {
            if item.mask.shape() != shape {
                return Err(fail(
                    Some(i),
                    format!("mask is {:?} but image is {:?}", item.mask.shape(), shape),
                ));
            }
            item.validate().map_err(|e| fail(Some(i), e.to_string()))?;
        }
        for (i, a) in items.iter().enumerate() {
            for (j, b) in items.iter().enumerate().skip(i + 1) {
                if let Some((r, c)) = a.mask.overlaps(&b.mask) {
                    return Err(fail(
                        Some(j),
                        format!("mask overlaps item {i} at row {r}, column {c}"),
                    ));
                }
            }
        }
        Ok(Self { id, image, items })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    pub fn items(&self) -> &[FoodItemAnnotation] {
        &self.items
    }

    /// `(height, width)` shared by the image and every mask.
    pub fn shape(&self) -> (usize, usize) {
        (self.image.height() as usize, self.image.width() as usize)
    }

    pub fn total_kcal(&self) -> f64 {
        self.items.iter().map(|i| i.kcal).sum()
    }

    /// Ground-truth density map: the disjoint sum of item densities.
    pub fn density_map(&self) -> Result<DensityMap> {
        let maps = self
            .items
            .iter()
            .map(generate_item_density)
            .collect::<Result<Vec<_>>>()?;
        combine_item_densities(self.shape(), &maps)
    }

    pub(crate) fn from_parts_unchecked(id: String, image: RgbImage, items: Vec<FoodItemAnnotation>) -> Self {
        Self { id, image, items }
    }
}
