//! Synthetic plated meals with exact segmentation masks.
//!
//! Every scene is a plate on a table holding a few non-overlapping colored
//! shapes. Each color belongs to a food class with a fixed calorie density,
//! and an item's calories are `density * foreground pixels`, so the energy
//! of a scene can be read off its pixels.

use std::f64::consts::PI;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EatingOccasion;
use crate::density::FoodItemAnnotation;
use crate::error::{Error, Result};
use crate::mask::SegmentationMask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodClass {
    pub label: String,
    pub color: [u8; 3],
    /// kCal per foreground pixel.
    pub density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Ellipse,
    Rectangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSceneConfig {
    pub image_size: u32,
    /// Inclusive bounds on the number of items per scene.
    pub items_per_scene: (usize, usize),
    pub palette: Vec<FoodClass>,
    pub plate_color: [u8; 3],
    pub table_color: [u8; 3],
    /// Uniform per-channel noise amplitude in gray levels.
    pub noise: u8,
    /// Shape half-extents as fractions of the image side.
    pub min_extent: f64,
    pub max_extent: f64,
    /// Placement attempts per shape before giving up.
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for SyntheticSceneConfig {
    fn default() -> Self {
        let class = |label: &str, color, density| FoodClass {
            label: label.into(),
            color,
            density,
        };
        Self {
            image_size: 64,
            items_per_scene: (1, 4),
            palette: vec![
                class("greens", [60, 150, 60], 0.25),
                class("salmon", [240, 128, 80], 0.75),
                class("pasta", [225, 200, 90], 1.5),
                class("steak", [120, 60, 40], 2.25),
            ],
            plate_color: [236, 236, 232],
            table_color: [92, 72, 60],
            noise: 4,
            min_extent: 0.06,
            max_extent: 0.16,
            max_attempts: 200,
            seed: 0,
        }
    }
}

impl SyntheticSceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::Invalid {
                what: "synthetic scene config",
                reason,
            })
        };
        let (lo, hi) = self.items_per_scene;
        if self.image_size < 8 {
            return bad(format!("image_size {} is below 8", self.image_size));
        }
        if lo == 0 || lo > hi {
            return bad(format!("items_per_scene ({lo}, {hi}) must satisfy 1 <= min <= max"));
        }
        if self.palette.is_empty() {
            return bad("palette is empty".into());
        }
        if let Some(c) = self
            .palette
            .iter()
            .find(|c| !(c.density.is_finite() && c.density > 0.0))
        {
            return bad(format!("class `{}` has density {}", c.label, c.density));
        }
        if !(self.min_extent > 0.0 && self.min_extent <= self.max_extent && self.max_extent < 0.5) {
            return bad(format!(
                "extents ({}, {}) must satisfy 0 < min <= max < 0.5",
                self.min_extent, self.max_extent
            ));
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive".into());
        }
        Ok(())
    }
}

/// Calories of an item of `class` occupying `mask`.
pub fn item_kcal(class: &FoodClass, mask: &SegmentationMask) -> f64 {
    class.density * mask.foreground_count() as f64
}

struct Shape {
    kind: ShapeKind,
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    angle: f64,
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (c * dx + s * dy) / self.a;
        let v = (-s * dx + c * dy) / self.b;
        match self.kind {
            ShapeKind::Ellipse => u * u + v * v <= 1.0,
            ShapeKind::Rectangle => u.abs() <= 1.0 && v.abs() <= 1.0,
        }
    }
}

const MIN_ITEM_PIXELS: usize = 6;

/// Generates `count` scenes named `scene_00000`, `scene_00001`, ...
///
/// Scene `i` draws from its own stream of the seeded generator, so scenes
/// are independent of each other and of `count`.
pub fn generate_synthetic(config: &SyntheticSceneConfig, count: usize) -> Result<Vec<EatingOccasion>> {
    config.validate()?;
    (0..count).map(|i| generate_scene(config, i)).collect()
}

fn generate_scene(config: &SyntheticSceneConfig, index: usize) -> Result<EatingOccasion> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);

    let size = config.image_size as usize;
    let side = size as f64;
    let centre = side / 2.0;
    let plate_r = 0.46 * side;
    let on_plate = |r: usize, c: usize| {
        let (x, y) = (c as f64 + 0.5 - centre, r as f64 + 0.5 - centre);
        x * x + y * y <= plate_r * plate_r
    };

    let (lo, hi) = config.items_per_scene;
    let n_items = rng.random_range(lo..=hi);
    // Cells taken by a placed shape or its one-pixel border.
    let mut blocked = vec![false; size * size];
    let mut placed: Vec<(usize, SegmentationMask)> = Vec::with_capacity(n_items);

    for _ in 0..n_items {
        let class = rng.random_range(0..config.palette.len());
        let kind = if rng.random_bool(0.5) {
            ShapeKind::Ellipse
        } else {
            ShapeKind::Rectangle
        };
        let mut attempt = 0;
        let mask = loop {
            if attempt == config.max_attempts {
                return Err(Error::PlacementFailure {
                    shapes: n_items,
                    size: config.image_size,
                    attempts: config.max_attempts,
                });
            }
            attempt += 1;
            // Later attempts draw from a shrinking extent range.
            let shrink = f64::from(attempt as u32 - 1) / config.max_attempts as f64;
            let hi = config.max_extent - (config.max_extent - config.min_extent) * shrink;
            let a = side * rng.random_range(config.min_extent..=hi);
            let b = side * rng.random_range(config.min_extent..=hi);
            let reach = plate_r - a.max(b);
            if reach <= 0.0 {
                continue;
            }
            let (rho, theta) = (reach * rng.random::<f64>().sqrt(), rng.random_range(0.0..2.0 * PI));
            let shape = Shape {
                kind,
                cx: centre + rho * theta.cos(),
                cy: centre + rho * theta.sin(),
                a,
                b,
                angle: rng.random_range(0.0..PI),
            };
            let cells: Vec<bool> = (0..size * size)
                .map(|i| {
                    let (r, c) = (i / size, i % size);
                    on_plate(r, c) && shape.contains(c as f64 + 0.5, r as f64 + 0.5)
                })
                .collect();
            let area = cells.iter().filter(|&&x| x).count();
            if area < MIN_ITEM_PIXELS || cells.iter().zip(&blocked).any(|(&x, &b)| x && b) {
                continue;
            }
            break cells;
        };
        for (i, _) in mask.iter().enumerate().filter(|(_, &x)| x) {
            let (r, c) = ((i / size) as isize, (i % size) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (rr, cc) = (r + dr, c + dc);
                    if (0..size as isize).contains(&rr) && (0..size as isize).contains(&cc) {
                        blocked[rr as usize * size + cc as usize] = true;
                    }
                }
            }
        }
        let pixels = mask.into_iter().map(u8::from).collect();
        placed.push((class, SegmentationMask::new(size, size, pixels)?));
    }

    let mut image = RgbImage::new(size as u32, size as u32);
    for (x, y, px) in image.enumerate_pixels_mut() {
        let (r, c) = (y as usize, x as usize);
        let base = placed
            .iter()
            .find(|(_, m)| m.get(r, c))
            .map(|(class, _)| config.palette[*class].color)
            .unwrap_or(if on_plate(r, c) {
                config.plate_color
            } else {
                config.table_color
            });
        let noise = i16::from(config.noise);
        *px = Rgb(base.map(|v| {
            let jitter = if noise > 0 { rng.random_range(-noise..=noise) } else { 0 };
            (i16::from(v) + jitter).clamp(0, 255) as u8
        }));
    }

    let items = placed
        .into_iter()
        .map(|(class, mask)| {
            let fc = &config.palette[class];
            FoodItemAnnotation::new(fc.label.clone(), item_kcal(fc, &mask), mask)
        })
        .collect::<Result<Vec<_>>>()?;
    EatingOccasion::new(format!("scene_{index:05}"), image, items)
}
