//! JSON manifest describing occasions and the PNG files that hold them.
//!
//! ```json
//! {"version": 1, "occasions": [{"id": "m1", "image": "images/m1.png",
//!   "items": [{"label": "rice", "kcal": 210.0, "mask": "masks/m1_0.png"}]}]}
//! ```
//!
//! Paths are relative to the manifest file.

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::prune::validate_raw;
use super::EatingOccasion;
use crate::error::{Error, Result};
use crate::mask::SegmentationMask;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestDoc {
    pub version: u32,
    pub occasions: Vec<ManifestOccasion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestOccasion {
    pub id: String,
    pub image: String,
    pub items: Vec<ManifestItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kcal: Option<f64>,
    pub mask: String,
}

/// An occasion as found on disk, before any validation.
#[derive(Debug, Clone)]
pub struct RawOccasion {
    pub id: String,
    pub image: std::result::Result<RgbImage, String>,
    pub items: Vec<RawItem>,
}

#[derive(Debug, Clone)]
pub struct RawItem {
    pub label: String,
    pub kcal: Option<f64>,
    pub mask: std::result::Result<SegmentationMask, String>,
}

impl From<&EatingOccasion> for RawOccasion {
    fn from(occ: &EatingOccasion) -> Self {
        Self {
            id: occ.id().to_string(),
            image: Ok(occ.image().clone()),
            items: occ
                .items()
                .iter()
                .map(|it| RawItem {
                    label: it.label.clone(),
                    kcal: Some(it.kcal),
                    mask: Ok(it.mask.clone()),
                })
                .collect(),
        }
    }
}

fn parse_doc(path: &Path) -> Result<ManifestDoc> {
    let text = fs::read_to_string(path)?;
    let doc: ManifestDoc = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if doc.version != MANIFEST_VERSION {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            reason: format!("unsupported manifest version {}", doc.version),
        });
    }
    Ok(doc)
}

/// Reads a manifest and every referenced PNG without validating anything
/// beyond JSON syntax. File-level problems are kept per image and per mask.
pub fn read_raw_manifest(path: &Path) -> Result<Vec<RawOccasion>> {
    let doc = parse_doc(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let occasions = doc
        .occasions
        .into_iter()
        .map(|occ| {
            let image = image::open(base.join(&occ.image))
                .map(|img| img.to_rgb8())
                .map_err(|e| format!("image {}: {e}", occ.image));
            let items = occ
                .items
                .into_iter()
                .map(|it| RawItem {
                    mask: SegmentationMask::read_png(&base.join(&it.mask))
                        .map_err(|e| format!("mask {}: {e}", it.mask)),
                    label: it.label,
                    kcal: it.kcal,
                })
                .collect();
            RawOccasion {
                id: occ.id,
                image,
                items,
            }
        })
        .collect();
    Ok(occasions)
}

/// Loads and validates every occasion, resizing to `target` pixels when
/// given. The first invalid occasion aborts the load.
pub fn load_manifest(path: &Path, target: Option<u32>) -> Result<Vec<EatingOccasion>> {
    let mut seen = std::collections::HashSet::new();
    read_raw_manifest(path)?
        .into_iter()
        .map(|raw| {
            if !seen.insert(raw.id.clone()) {
                return Err(Error::Validation {
                    occasion: raw.id,
                    item: None,
                    reason: "duplicate occasion id".into(),
                });
            }
            let id = raw.id.clone();
            validate_raw(raw, target).map_err(|(item, reason)| Error::Validation {
                occasion: id,
                item,
                reason: reason.to_string(),
            })
        })
        .collect()
}

fn check_file_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Invalid {
            what: "occasion id",
            reason: format!("`{id}` cannot be used as a file name"),
        })
    }
}

/// Writes `manifest.json` plus `images/<id>.png` and `masks/<id>_<k>.png`
/// under `dir`. Returns the manifest path.
pub fn save_manifest(dir: &Path, occasions: &[EatingOccasion]) -> Result<PathBuf> {
    fs::create_dir_all(dir.join("images"))?;
    fs::create_dir_all(dir.join("masks"))?;
    let mut doc = ManifestDoc {
        version: MANIFEST_VERSION,
        occasions: Vec::with_capacity(occasions.len()),
    };
    for occ in occasions {
        check_file_id(occ.id())?;
        let image = format!("images/{}.png", occ.id());
        occ.image().save(dir.join(&image))?;
        let mut items = Vec::with_capacity(occ.items().len());
        for (k, item) in occ.items().iter().enumerate() {
            let mask = format!("masks/{}_{k}.png", occ.id());
            item.mask.write_png(&dir.join(&mask))?;
            items.push(ManifestItem {
                label: item.label.clone(),
                kcal: Some(item.kcal),
                mask,
            });
        }
        doc.occasions.push(ManifestOccasion {
            id: occ.id().to_string(),
            image,
            items,
        });
    }
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}
