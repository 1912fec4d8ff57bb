use super::EatingOccasion;
use crate::density::FoodItemAnnotation;
use crate::flip::{Axis, Flip};

fn flipped(occ: &EatingOccasion, axes: &[Axis], suffix: &str) -> EatingOccasion {
    let mut image = occ.image().clone();
    let mut items: Vec<FoodItemAnnotation> = occ.items().to_vec();
    for &axis in axes {
        image = image.flip(axis);
        for item in &mut items {
            item.mask = item.mask.flip(axis);
        }
    }
    EatingOccasion::from_parts_unchecked(format!("{}{suffix}", occ.id()), image, items)
}

/// Identity, horizontal, vertical and double flips of a training occasion.
///
/// Only training data is expanded this way; evaluation always sees the
/// original images.
pub fn augment_fourfold(occ: &EatingOccasion) -> [EatingOccasion; 4] {
    [
        occ.clone(),
        flipped(occ, &[Axis::Horizontal], "_h"),
        flipped(occ, &[Axis::Vertical], "_v"),
        flipped(occ, &[Axis::Horizontal, Axis::Vertical], "_hv"),
    ]
}
