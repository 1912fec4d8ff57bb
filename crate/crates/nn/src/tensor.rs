//! Conversions between dataset rasters and NCHW tensors.

use candle_core::{Device, Tensor};
use image::RgbImage;
use kcalmap_core::DensityMap;

use crate::error::Result;

/// `(1, 3, H, W)` with pixel values mapped to `[-1, 1]`.
pub fn image_to_tensor(img: &RgbImage, device: &Device) -> Result<Tensor> {
    let (w, h) = img.dimensions();
    let (w, h) = (w as usize, h as usize);
    let mut data = vec![0f32; 3 * h * w];
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            data[c * h * w + y as usize * w + x as usize] = f32::from(px.0[c]) / 127.5 - 1.0;
        }
    }
    Ok(Tensor::from_vec(data, (1, 3, h, w), device)?)
}

/// `(1, 1, H, W)` holding `values * factor`.
pub fn map_to_tensor(map: &DensityMap, factor: f32, device: &Device) -> Result<Tensor> {
    let (h, w) = map.shape();
    let data: Vec<f32> = map.values().iter().map(|v| v * factor).collect();
    Ok(Tensor::from_vec(data, (1, 1, h, w), device)?)
}
