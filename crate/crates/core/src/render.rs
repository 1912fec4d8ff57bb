use image::{GrayImage, Luma};

use crate::density::DensityMap;

/// Renders relative intensities: the map's maximum becomes 255 and zero
/// stays black.
pub fn render_visualization(map: &DensityMap) -> GrayImage {
    let (h, w) = map.shape();
    let max = f64::from(map.max_value());
    GrayImage::from_fn(w as u32, h as u32, |x, y| {
        let v = f64::from(map.get(y as usize, x as usize));
        let level = if max > 0.0 {
            (v / max * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        };
        Luma([level])
    })
}
