//! Binary segmentation masks locating a single food item.

use std::path::Path;

use image::{GrayImage, Luma};

use crate::error::{Error, Result};

/// Pixel value marking foreground in mask PNGs.
pub const MASK_FOREGROUND: u8 = 255;

/// An `height x width` binary grid, row-major, each cell 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl SegmentationMask {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Invalid {
                what: "mask",
                reason: format!("dimensions must be positive, got {height}x{width}"),
            });
        }
        if pixels.len() != height * width {
            return Err(Error::Invalid {
                what: "mask",
                reason: format!("expected {} pixels, got {}", height * width, pixels.len()),
            });
        }
        if let Some(bad) = pixels.iter().find(|&&p| p > 1) {
            return Err(Error::Invalid {
                what: "mask",
                reason: format!("cell value {bad} is not binary"),
            });
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn empty(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0; height * width])
    }

    /// Builds a mask from a predicate over `(row, col)`.
    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let pixels = (0..height * width)
            .map(|i| u8::from(f(i / width, i % width)))
            .collect();
        Self::new(height, width, pixels)
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

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.pixels[row * self.width + col] == 1
    }

    /// Number of foreground cells.
    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == 1).count()
    }

    pub fn overlaps(&self, other: &SegmentationMask) -> Option<(usize, usize)> {
        if self.shape() != other.shape() {
            return None;
        }
        self.pixels
            .iter()
            .zip(&other.pixels)
            .position(|(&a, &b)| a == 1 && b == 1)
            .map(|i| (i / self.width, i % self.width))
    }

    /// Converts an 8-bit grayscale raster (0 background, 255 foreground).
    pub fn from_gray(img: &GrayImage) -> Result<Self> {
        let (w, h) = img.dimensions();
        let mut pixels = Vec::with_capacity((w * h) as usize);
        for (x, y, Luma([v])) in img.enumerate_pixels() {
            match *v {
                0 => pixels.push(0),
                MASK_FOREGROUND => pixels.push(1),
                other => {
                    return Err(Error::Invalid {
                        what: "mask",
                        reason: format!("pixel value {other} at ({y}, {x}) is neither 0 nor 255"),
                    })
                }
            }
        }
        Self::new(h as usize, w as usize, pixels)
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            Luma([self.pixels[y as usize * self.width + x as usize] * MASK_FOREGROUND])
        })
    }

    /// Reads a mask PNG. The file must be single-channel 8-bit.
    pub fn read_png(path: &Path) -> Result<Self> {
        let img = image::open(path)?;
        match img {
            image::DynamicImage::ImageLuma8(g) => Self::from_gray(&g),
            other => Err(Error::Invalid {
                what: "mask",
                reason: format!(
                    "{} is {:?}, expected 8-bit single-channel",
                    path.display(),
                    other.color()
                ),
            }),
        }
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        self.to_gray().save(path)?;
        Ok(())
    }

    pub(crate) fn from_parts_unchecked(height: usize, width: usize, pixels: Vec<u8>) -> Self {
        debug_assert_eq!(pixels.len(), height * width);
        Self {
            height,
            width,
            pixels,
        }
    }
}
