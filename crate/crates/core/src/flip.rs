//! Mirror transforms shared by images, masks and density maps.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::density::DensityMap;
use crate::mask::SegmentationMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Mirror left-right (columns reversed).
    Horizontal,
    /// Mirror top-bottom (rows reversed).
    Vertical,
}

pub trait Flip {
    fn flip(&self, axis: Axis) -> Self;
}

fn flip_grid<T: Copy>(cells: &[T], height: usize, width: usize, axis: Axis) -> Vec<T> {
    let mut out = Vec::with_capacity(cells.len());
    for r in 0..height {
        for c in 0..width {
            let (sr, sc) = match axis {
                Axis::Horizontal => (r, width - 1 - c),
                Axis::Vertical => (height - 1 - r, c),
            };
            out.push(cells[sr * width + sc]);
        }
    }
    out
}

impl Flip for DensityMap {
    fn flip(&self, axis: Axis) -> Self {
        let (h, w) = self.shape();
        DensityMap::from_parts_unchecked(h, w, flip_grid(self.values(), h, w, axis))
    }
}

impl Flip for SegmentationMask {
    fn flip(&self, axis: Axis) -> Self {
        let (h, w) = self.shape();
        SegmentationMask::from_parts_unchecked(h, w, flip_grid(self.pixels(), h, w, axis))
    }
}

impl Flip for RgbImage {
    fn flip(&self, axis: Axis) -> Self {
        match axis {
            Axis::Horizontal => image::imageops::flip_horizontal(self),
            Axis::Vertical => image::imageops::flip_vertical(self),
        }
    }
}
