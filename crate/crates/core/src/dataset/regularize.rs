use image::imageops::{self, FilterType};
use image::RgbImage;

use crate::error::{Error, Result};
use crate::mask::SegmentationMask;

pub const DEFAULT_IMAGE_SIZE: u32 = 256;
const MIN_TARGET: u32 = 8;

/// Resizes an image and its masks to `target x target`.
///
/// The image is resampled bilinearly and masks with nearest neighbour, so
/// they stay binary. Non-square inputs are stretched. Density maps must be
/// generated from the resized masks, never resized themselves.
pub fn regularize_image(
    image: &RgbImage,
    masks: &[SegmentationMask],
    target: u32,
) -> Result<(RgbImage, Vec<SegmentationMask>)> {
    if target < MIN_TARGET {
        return Err(Error::Invalid {
            what: "target size",
            reason: format!("{target} is below the minimum of {MIN_TARGET}"),
        });
    }
    if image.dimensions() == (target, target) {
        return Ok((image.clone(), masks.to_vec()));
    }
    let resized = imageops::resize(image, target, target, FilterType::Triangle);
    let masks = masks
        .iter()
        .map(|m| {
            let gray = imageops::resize(&m.to_gray(), target, target, FilterType::Nearest);
            SegmentationMask::from_gray(&gray)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((resized, masks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn disc(h: usize, w: usize) -> SegmentationMask {
        SegmentationMask::from_fn(h, w, |r, c| {
            let (dr, dc) = (r as f64 - h as f64 / 2.0, c as f64 - w as f64 / 2.0);
            (dr / h as f64).powi(2) + (dc / w as f64).powi(2) < 0.1
        })
        .unwrap()
    }

    #[test]
    fn downsizes_keeping_masks_binary() {
        let img = RgbImage::from_fn(512, 512, |x, y| Rgb([(x % 256) as u8, (y % 256) as u8, 9]));
        let (out, masks) = regularize_image(&img, &[disc(512, 512)], 256).unwrap();
        assert_eq!(out.dimensions(), (256, 256));
        assert_eq!(masks[0].shape(), (256, 256));
        assert!(masks[0].to_gray().pixels().all(|p| p.0[0] == 0 || p.0[0] == 255));
        let ratio = masks[0].foreground_count() as f64 / disc(512, 512).foreground_count() as f64;
        assert!((ratio - 0.25).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn target_sized_input_is_unchanged() {
        let img = RgbImage::from_fn(256, 256, |x, y| Rgb([x as u8, y as u8, 1]));
        let m = disc(256, 256);
        let (out, masks) = regularize_image(&img, &[m.clone()], 256).unwrap();
        assert_eq!(out, img);
        assert_eq!(masks, vec![m]);
    }

    #[test]
    fn stretches_non_square_inputs() {
        // 300 rows x 400 columns: a vertical band in the left quarter stays
        // in the left quarter after stretching.
        let img = RgbImage::new(400, 300);
        let band = SegmentationMask::from_fn(300, 400, |_, c| c < 100).unwrap();
        let (out, masks) = regularize_image(&img, &[band], 256).unwrap();
        assert_eq!(out.dimensions(), (256, 256));
        assert_eq!(masks[0].foreground_count(), 64 * 256);
        assert!(masks[0].get(128, 63) && !masks[0].get(128, 64));
    }

    #[test]
    fn bilinear_keeps_flat_colors() {
        let img = RgbImage::from_pixel(40, 40, Rgb([10, 200, 30]));
        let (out, _) = regularize_image(&img, &[], 16).unwrap();
        assert!(out.pixels().all(|p| p.0 == [10, 200, 30]));
    }

    #[test]
    fn rejects_tiny_targets() {
        assert!(regularize_image(&RgbImage::new(4, 4), &[], 4).is_err());
    }
}
