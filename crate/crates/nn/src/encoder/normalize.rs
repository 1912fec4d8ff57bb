//! Mapping kCal-per-pixel densities to the generator's unit range.

use kcalmap_core::DensityMap;

use crate::error::{Error, Result};

fn check_k(k: f64) -> Result<()> {
    if k.is_finite() && k > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveK(k))
    }
}

/// Divides by `k` and clamps to `[0, 1]`.
pub fn normalize_density(map: &DensityMap, k: f64) -> Result<Vec<f32>> {
    check_k(k)?;
    Ok(map
        .values()
        .iter()
        .map(|&v| (f64::from(v) / k).clamp(0.0, 1.0) as f32)
        .collect())
}

/// Multiplies unit-range cells by `k`. Negative or non-finite cells are
/// rejected by the map constructor.
pub fn denormalize_density(grid: &[f32], shape: (usize, usize), k: f64) -> Result<DensityMap> {
    check_k(k)?;
    let values = grid.iter().map(|&g| (f64::from(g) * k) as f32).collect();
    Ok(DensityMap::new(shape.0, shape.1, values)?)
}

/// Largest per-pixel density over a set of maps; a normalization constant at
/// least this large leaves every training target unclamped.
pub fn max_density<'a>(maps: impl IntoIterator<Item = &'a DensityMap>) -> f64 {
    maps.into_iter()
        .map(|m| f64::from(m.max_value()))
        .fold(0.0, f64::max)
}
