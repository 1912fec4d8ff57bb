//! Lossy 8-bit stand-in for real-valued density maps.
//!
//! Each cell stores `clamp(round(value / scale), 0, 255)` where `scale` is
//! the number of kCal per pixel represented by one gray level. Rounding is
//! half away from zero.

use crate::density::DensityMap;
use crate::error::{Error, Result};

pub const DEFAULT_GRAYSCALE_SCALE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GrayscaleMap {
    height: usize,
    width: usize,
    values: Vec<u8>,
    scale: f64,
}

impl GrayscaleMap {
    pub fn new(height: usize, width: usize, values: Vec<u8>, scale: f64) -> Result<Self> {
        check_scale(scale)?;
        if values.len() != height * width {
            return Err(Error::Invalid {
                what: "grayscale map",
                reason: format!("{} values for a {height}x{width} grid", values.len()),
            });
        }
        Ok(Self {
            height,
            width,
            values,
            scale,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if scale.is_finite() && scale > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveScale(scale))
    }
}

pub fn encode_grayscale(map: &DensityMap, scale: f64) -> Result<GrayscaleMap> {
    check_scale(scale)?;
    let values = map
        .values()
        .iter()
        .map(|&v| (f64::from(v) / scale).round().clamp(0.0, 255.0) as u8)
        .collect();
    let (height, width) = map.shape();
    Ok(GrayscaleMap {
        height,
        width,
        values,
        scale,
    })
}

pub fn decode_grayscale(gmap: &GrayscaleMap) -> f64 {
    let levels: u64 = gmap.values.iter().map(|&v| u64::from(v)).sum();
    gmap.scale * levels as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::summation_decode;
    use proptest::prelude::*;

    fn row(values: &[f32]) -> DensityMap {
        DensityMap::new(1, values.len(), values.to_vec()).unwrap()
    }

    #[test]
    fn encodes_rounds_and_clamps() {
        let g = encode_grayscale(&row(&[25.0, 100.0 / 3.0, 1000.0, 0.5, 0.49]), 1.0).unwrap();
        assert_eq!(g.values(), &[25, 33, 255, 1, 0]);
    }

    #[test]
    fn rounding_loses_a_calorie_over_three_pixels() {
        let third = (100.0f64 / 3.0) as f32;
        let d = row(&[third, third, third]);
        let g = encode_grayscale(&d, 1.0).unwrap();
        assert_eq!(decode_grayscale(&g), 99.0);
        // The tensor path keeps the 100 kCal.
        assert!((summation_decode(&d) - 100.0).abs() < 1e-5);
    }

    #[test]
    fn decode_basic_cases() {
        assert_eq!(decode_grayscale(&GrayscaleMap::new(2, 2, vec![0; 4], 1.0).unwrap()), 0.0);
        let g = GrayscaleMap::new(1, 3, vec![0, 255, 0], 2.0).unwrap();
        assert_eq!(decode_grayscale(&g), 510.0);
    }

    #[test]
    fn rejects_bad_scale() {
        let d = row(&[1.0]);
        assert!(matches!(encode_grayscale(&d, 0.0), Err(Error::NonPositiveScale(_))));
        assert!(matches!(encode_grayscale(&d, -1.0), Err(Error::NonPositiveScale(_))));
        assert!(GrayscaleMap::new(1, 1, vec![1], f64::NAN).is_err());
    }

    #[test]
    fn clamping_exceeds_the_rounding_bound() {
        let d = row(&[1000.0; 10]);
        let g = encode_grayscale(&d, 1.0).unwrap();
        let err = (decode_grayscale(&g) - summation_decode(&d)).abs();
        assert_eq!(decode_grayscale(&g), 2550.0);
        assert!(err > 0.5 * 1.0 * 10.0);
    }

    proptest! {
        #[test]
        fn unclamped_error_is_half_level_per_cell(
            values in proptest::collection::vec(0.0f32..200.0, 1..64),
            scale in 0.8f64..4.0,
        ) {
            let d = row(&values);
            let g = encode_grayscale(&d, scale).unwrap();
            let nonzero = values.iter().filter(|&&v| v != 0.0).count() as f64;
            let err = (decode_grayscale(&g) - summation_decode(&d)).abs();
            prop_assert!(err <= 0.5 * scale * nonzero + 1e-9);
        }
    }
}
