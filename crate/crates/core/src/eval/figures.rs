//! PNG figures: signed-error histograms and qualitative panels.

use std::path::Path;

use image::imageops::{self, FilterType};
use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::font::{draw_text, text_width, GLYPH_H};
use super::report::EvaluationReport;
use crate::dataset::EatingOccasion;
use crate::density::DensityMap;
use crate::error::{Error, Result};
use crate::render::render_visualization;

pub const HISTOGRAM_BINS: usize = 20;

const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
const INK: Rgb<u8> = Rgb([20, 20, 20]);
const BAR: Rgb<u8> = Rgb([52, 101, 164]);

/// Equal-width bins over `[-m, m]` where `m` is the largest absolute error
/// (1 kCal when every error is zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Serialize)]
struct BinRow {
    bin_start: f64,
    bin_end: f64,
    count: usize,
}

impl ErrorHistogram {
    pub fn from_report(report: &EvaluationReport, bins: usize) -> Result<Self> {
        if report.records.is_empty() {
            return Err(Error::EmptyTestSet);
        }
        if bins == 0 {
            return Err(Error::Invalid {
                what: "histogram",
                reason: "bin count must be positive".into(),
            });
        }
        let max = report.records.iter().map(|r| r.error.abs()).fold(0.0, f64::max);
        let half = if max > 0.0 { max } else { 1.0 };
        let width = 2.0 * half / bins as f64;
        let edges = (0..=bins).map(|i| -half + i as f64 * width).collect();
        let mut counts = vec![0; bins];
        for r in &report.records {
            let idx = ((r.error + half) / width).floor() as usize;
            counts[idx.min(bins - 1)] += 1;
        }
        Ok(Self { edges, counts })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for (i, &count) in self.counts.iter().enumerate() {
            w.serialize(BinRow {
                bin_start: self.edges[i],
                bin_end: self.edges[i + 1],
                count,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn render(&self) -> RgbImage {
        const BAR_W: u32 = 14;
        const PLOT_H: u32 = 160;
        const MARGIN: u32 = 12;
        let bins = self.counts.len() as u32;
        let width = 2 * MARGIN + bins * BAR_W;
        let label_h = GLYPH_H + 6;
        let height = 2 * MARGIN + PLOT_H + label_h;
        let mut img = RgbImage::from_pixel(width, height, BACKGROUND);
        let peak = self.counts.iter().copied().max().unwrap_or(0).max(1);
        let base = MARGIN + PLOT_H;
        for (i, &c) in self.counts.iter().enumerate() {
            let h = (c as f64 / peak as f64 * PLOT_H as f64).round() as u32;
            let x0 = MARGIN + i as u32 * BAR_W;
            for x in x0 + 1..x0 + BAR_W - 1 {
                for y in base - h..base {
                    img.put_pixel(x, y, BAR);
                }
            }
        }
        for x in MARGIN..width - MARGIN {
            img.put_pixel(x, base, INK);
        }
        let mid = MARGIN + bins * BAR_W / 2;
        for y in MARGIN..base {
            if y % 4 < 2 {
                img.put_pixel(mid, y, INK);
            }
        }
        let lo = format!("{:.1}", self.edges[0]);
        let hi = format!("{:.1}", self.edges[self.edges.len() - 1]);
        draw_text(&mut img, &lo, MARGIN, base + 4, 1, INK);
        let hx = (width - MARGIN).saturating_sub(text_width(&hi, 1));
        draw_text(&mut img, &hi, hx, base + 4, 1, INK);
        draw_text(&mut img, "0", mid.saturating_sub(2), base + 4, 1, INK);
        img
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        self.render().save(path)?;
        Ok(())
    }
}

/// Caption used under qualitative panels.
pub fn panel_caption(estimate: f64, truth: f64) -> String {
    format!("est={estimate:.1} kCal / true={truth:.1} kCal")
}

fn gray_to_rgb(img: &image::GrayImage) -> RgbImage {
    RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let v = img.get_pixel(x, y).0[0];
        Rgb([v, v, v])
    })
}

/// Side by side: input image, predicted map and ground-truth map, each
/// upscaled to at least 128 pixels, with the calorie caption underneath.
pub fn render_panel(
    occasion: &EatingOccasion,
    predicted: &DensityMap,
    estimate: f64,
) -> Result<(RgbImage, String)> {
    let truth_map = occasion.density_map()?;
    if predicted.shape() != truth_map.shape() {
        return Err(Error::ShapeMismatch {
            expected: truth_map.shape(),
            actual: predicted.shape(),
        });
    }
    let (h, w) = occasion.shape();
    let zoom = (128 / h.max(w) as u32).max(1);
    let (tw, th) = (w as u32 * zoom, h as u32 * zoom);
    let tiles = [
        occasion.image().clone(),
        gray_to_rgb(&render_visualization(predicted)),
        gray_to_rgb(&render_visualization(&truth_map)),
    ];

    let caption = panel_caption(estimate, occasion.total_kcal());
    let gap = 6;
    let text_scale = 2;
    let width = (3 * tw + 4 * gap).max(text_width(&caption, text_scale) + 2 * gap);
    let height = th + 3 * gap + GLYPH_H * text_scale;
    let mut img = RgbImage::from_pixel(width, height, BACKGROUND);
    for (i, tile) in tiles.iter().enumerate() {
        let big = imageops::resize(tile, tw, th, FilterType::Nearest);
        imageops::replace(&mut img, &big, i64::from(gap + i as u32 * (tw + gap)), i64::from(gap));
    }
    draw_text(&mut img, &caption, gap, th + 2 * gap, text_scale, INK);
    Ok((img, caption))
}

pub fn qualitative_panel(
    occasion: &EatingOccasion,
    predicted: &DensityMap,
    estimate: f64,
    path: &Path,
) -> Result<String> {
    let (img, caption) = render_panel(occasion, predicted, estimate)?;
    img.save(path)?;
    Ok(caption)
}
