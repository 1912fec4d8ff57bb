//! Per-pixel calorie density maps.
//!
//! An item with `kcal` calories and a mask of `w` foreground pixels spreads
//! `kcal / w` onto each of those pixels. Item masks are disjoint, so the
//! occasion map is the elementwise sum of the item maps and its total equals
//! the summed item calories. Values are stored as `f32`; totals are exact
//! sums rounded once to `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::SegmentationMask;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl DensityMap {
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::Invalid {
                what: "density map",
                reason: format!(
                    "{} values do not fill a {height}x{width} grid",
                    values.len()
                ),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid {
                what: "density map",
                reason: format!("cell {i} holds {}, expected finite and >= 0", values[i]),
            });
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }

    pub fn max_value(&self) -> f32 {
        self.values.iter().copied().fold(0.0, f32::max)
    }

    /// Multiplies every cell by a non-negative factor.
    pub fn scaled(&self, factor: f32) -> Result<Self> {
        Self::new(
            self.height,
            self.width,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    pub(crate) fn from_parts_unchecked(height: usize, width: usize, values: Vec<f32>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        Self {
            height,
            width,
            values,
        }
    }
}

/// One annotated food item: its label, calories and segmentation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FoodItemAnnotation {
    pub label: String,
    pub kcal: f64,
    pub mask: SegmentationMask,
}

impl FoodItemAnnotation {
    pub fn new(label: impl Into<String>, kcal: f64, mask: SegmentationMask) -> Result<Self> {
        let item = Self {
            label: label.into(),
            kcal,
            mask,
        };
        item.validate()?;
        Ok(item)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kcal.is_finite() && self.kcal > 0.0) {
            return Err(Error::Invalid {
                what: "food item",
                reason: format!("kcal must be positive, got {}", self.kcal),
            });
        }
        if self.mask.foreground_count() == 0 {
            return Err(Error::ZeroAreaMask);
        }
        Ok(())
    }
}

/// Spreads an item's calories uniformly over its mask foreground.
pub fn generate_item_density(item: &FoodItemAnnotation) -> Result<DensityMap> {
    let area = item.mask.foreground_count();
    if area == 0 {
        return Err(Error::ZeroAreaMask);
    }
    if !(item.kcal.is_finite() && item.kcal > 0.0) {
        return Err(Error::Invalid {
            what: "food item",
            reason: format!("kcal must be positive, got {}", item.kcal),
        });
    }
    let per_pixel = (item.kcal / area as f64) as f32;
    let values = item
        .mask
        .pixels()
        .iter()
        .map(|&p| if p == 1 { per_pixel } else { 0.0 })
        .collect();
    let (h, w) = item.mask.shape();
    Ok(DensityMap::from_parts_unchecked(h, w, values))
}

/// Sums item maps whose supports must be pairwise disjoint.
pub fn combine_item_densities(
    shape: (usize, usize),
    maps: &[DensityMap],
) -> Result<DensityMap> {
    let (h, w) = shape;
    let mut out = vec![0.0f32; h * w];
    for map in maps {
        if map.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape,
                actual: map.shape(),
            });
        }
        for (i, (acc, &v)) in out.iter_mut().zip(&map.values).enumerate() {
            if v != 0.0 {
                if *acc != 0.0 {
                    return Err(Error::OverlappingSupport {
                        row: i / w,
                        col: i % w,
                    });
                }
                *acc = v;
            }
        }
    }
    Ok(DensityMap::from_parts_unchecked(h, w, out))
}

/// Total calories of a density map: the sum of every cell.
///
/// The sum is computed exactly and rounded once to `f64`, so it does not
/// depend on cell order (flips and permutations decode identically).
pub fn summation_decode(map: &DensityMap) -> f64 {
    let mut acc = ExactSum::default();
    for &v in &map.values {
        acc.add(v);
    }
    acc.value()
}

/// Exact accumulator for non-negative `f32` values.
///
/// Every finite `f32` is an integer multiple of 2^-149 below 2^128, so a
/// 320-bit fixed-point integer holds the sum of up to 2^32 of them.
#[derive(Debug, Clone, Default)]
pub(crate) struct ExactSum {
    limbs: [u64; 5],
}

impl ExactSum {
    pub(crate) fn add(&mut self, v: f32) {
        debug_assert!(v.is_finite() && v >= 0.0);
        let bits = v.to_bits();
        let exp = (bits >> 23) & 0xff;
        let frac = u64::from(bits & 0x7f_ffff);
        let (mant, shift) = if exp == 0 {
            (frac, 0)
        } else {
            (frac | 0x80_0000, exp as usize - 1)
        };
        if mant == 0 {
            return;
        }
        let (limb, off) = (shift / 64, shift % 64);
        let wide = u128::from(mant) << off;
        self.add_at(limb, wide as u64);
        self.add_at(limb + 1, (wide >> 64) as u64);
    }

    fn add_at(&mut self, mut limb: usize, mut x: u64) {
        while x != 0 {
            let (sum, carry) = self.limbs[limb].overflowing_add(x);
            self.limbs[limb] = sum;
            x = u64::from(carry);
            limb += 1;
        }
    }

    fn bit(&self, i: usize) -> bool {
        self.limbs[i / 64] >> (i % 64) & 1 == 1
    }

    /// Correctly rounded (half to even) value of the sum.
    pub(crate) fn value(&self) -> f64 {
        let Some(top) = (0..5).rev().find(|&l| self.limbs[l] != 0) else {
            return 0.0;
        };
        let high = top * 64 + 63 - self.limbs[top].leading_zeros() as usize;
        let unit = 2f64.powi(-149);
        if high < 53 {
            return self.limbs[0] as f64 * unit;
        }
        let low = high - 52;
        let mut mant = 0u64;
        for i in (low..=high).rev() {
            mant = mant << 1 | u64::from(self.bit(i));
        }
        let round = self.bit(low - 1);
        let sticky = (0..low - 1).any(|i| self.bit(i));
        if round && (sticky || mant & 1 == 1) {
            mant += 1;
        }
        mant as f64 * 2f64.powi(low as i32 - 149)
    }
}

/// Serialized sidecar describing a map without its payload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub height: usize,
    pub width: usize,
    pub total_kcal: f64,
    pub max_density: f32,
}

impl From<&DensityMap> for MapSummary {
    fn from(map: &DensityMap) -> Self {
        Self {
            height: map.height,
            width: map.width,
            total_kcal: summation_decode(map),
            max_density: map.max_value(),
        }
    }
}
