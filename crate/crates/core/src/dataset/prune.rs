use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::manifest::RawOccasion;
use super::regularize::regularize_image;
use super::EatingOccasion;
use crate::density::FoodItemAnnotation;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunePolicy {
    /// Square side every kept occasion is resized to.
    pub target_size: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectionReason {
    NoItems,
    DuplicateId,
    UnreadableImage { detail: String },
    MissingKcal,
    NonPositiveKcal { kcal: f64 },
    InvalidMask { detail: String },
    ShapeMismatch { mask: (usize, usize), image: (usize, usize) },
    EmptyMask,
    OverlappingMasks { other: usize },
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoItems => write!(f, "no food items"),
            Self::DuplicateId => write!(f, "duplicate occasion id"),
            Self::UnreadableImage { detail } => write!(f, "unreadable image ({detail})"),
            Self::MissingKcal => write!(f, "missing kcal"),
            Self::NonPositiveKcal { kcal } => write!(f, "non-positive kcal {kcal}"),
            Self::InvalidMask { detail } => write!(f, "invalid mask ({detail})"),
            Self::ShapeMismatch { mask, image } => {
                write!(f, "mask shape {mask:?} differs from image shape {image:?}")
            }
            Self::EmptyMask => write!(f, "empty mask"),
            Self::OverlappingMasks { other } => write!(f, "overlapping masks (with item {other})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub item: Option<usize>,
    pub reason: RejectionReason,
}

type Invalid = (Option<usize>, RejectionReason);

/// Checks a raw occasion against every occasion invariant, resizing it to
/// `target` before the area and disjointness checks.
pub(crate) fn validate_raw(raw: RawOccasion, target: Option<u32>) -> Result<EatingOccasion, Invalid> {
    if raw.items.is_empty() {
        return Err((None, RejectionReason::NoItems));
    }
    let image = raw
        .image
        .map_err(|detail| (None, RejectionReason::UnreadableImage { detail }))?;
    let shape = (image.height() as usize, image.width() as usize);
    let mut labels = Vec::with_capacity(raw.items.len());
    let mut masks = Vec::with_capacity(raw.items.len());
    let mut kcals = Vec::with_capacity(raw.items.len());
    for (i, item) in raw.items.into_iter().enumerate() {
        let kcal = item.kcal.ok_or((Some(i), RejectionReason::MissingKcal))?;
        if !(kcal.is_finite() && kcal > 0.0) {
            return Err((Some(i), RejectionReason::NonPositiveKcal { kcal }));
        }
        let mask = item
            .mask
            .map_err(|detail| (Some(i), RejectionReason::InvalidMask { detail }))?;
        if mask.shape() != shape {
            return Err((
                Some(i),
                RejectionReason::ShapeMismatch {
                    mask: mask.shape(),
                    image: shape,
                },
            ));
        }
        labels.push(item.label);
        masks.push(mask);
        kcals.push(kcal);
    }

    let (image, masks) = match target {
        Some(t) => regularize_image(&image, &masks, t)
            .map_err(|e| (None, RejectionReason::UnreadableImage { detail: e.to_string() }))?,
        None => (image, masks),
    };

    for (i, m) in masks.iter().enumerate() {
        if m.foreground_count() == 0 {
            return Err((Some(i), RejectionReason::EmptyMask));
        }
        if let Some(j) = masks[..i].iter().position(|prev| prev.overlaps(m).is_some()) {
            return Err((Some(i), RejectionReason::OverlappingMasks { other: j }));
        }
    }
    let items = labels
        .into_iter()
        .zip(kcals)
        .zip(masks)
        .map(|((label, kcal), mask)| FoodItemAnnotation { label, kcal, mask })
        .collect();
    Ok(EatingOccasion::from_parts_unchecked(raw.id, image, items))
}

/// Splits raw occasions into valid ones and a per-id rejection report.
pub fn prune(
    occasions: impl IntoIterator<Item = RawOccasion>,
    policy: &PrunePolicy,
) -> (Vec<EatingOccasion>, Vec<Rejection>) {
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = HashSet::new();
    for raw in occasions {
        let id = raw.id.clone();
        if !seen.insert(id.clone()) {
            rejected.push(Rejection {
                id,
                item: None,
                reason: RejectionReason::DuplicateId,
            });
            continue;
        }
        match validate_raw(raw, policy.target_size) {
            Ok(occ) => kept.push(occ),
            Err((item, reason)) => rejected.push(Rejection { id, item, reason }),
        }
    }
    (kept, rejected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RawItem;
    use crate::mask::SegmentationMask;
    use image::RgbImage;

    fn raw(id: &str, items: &[(Option<f64>, fn(usize, usize) -> bool)]) -> RawOccasion {
        RawOccasion {
            id: id.into(),
            image: Ok(RgbImage::new(6, 6)),
            items: items
                .iter()
                .map(|(kcal, f)| RawItem {
                    label: "food".into(),
                    kcal: *kcal,
                    mask: SegmentationMask::from_fn(6, 6, f).map_err(|e| e.to_string()),
                })
                .collect(),
        }
    }

    fn top(r: usize, _: usize) -> bool {
        r < 2
    }
    fn bottom(r: usize, _: usize) -> bool {
        r > 3
    }
    fn left(_: usize, c: usize) -> bool {
        c == 0
    }
    fn nothing(_: usize, _: usize) -> bool {
        false
    }

    #[test]
    fn drops_the_one_missing_calorie_value() {
        let mut occs: Vec<_> = (0..5)
            .map(|i| raw(&format!("o{i}"), &[(Some(100.0), top), (Some(50.0), bottom)]))
            .collect();
        occs[2].items[1].kcal = None;
        let (kept, rejected) = prune(occs, &PrunePolicy::default());
        assert_eq!(kept.len(), 4);
        assert_eq!(rejected.len(), 1);
        assert_eq!(rejected[0].id, "o2");
        assert_eq!(rejected[0].item, Some(1));
        assert_eq!(rejected[0].reason.to_string(), "missing kcal");
    }

    #[test]
    fn valid_input_passes_untouched() {
        let occs: Vec<_> = (0..3)
            .map(|i| raw(&format!("o{i}"), &[(Some(10.0 + i as f64), top)]))
            .collect();
        let (kept, rejected) = prune(occs, &PrunePolicy::default());
        assert_eq!(kept.len(), 3);
        assert!(rejected.is_empty());
        assert_eq!(kept[1].total_kcal(), 11.0);
    }

    #[test]
    fn reports_each_kind_of_corruption() {
        let mut unreadable = raw("img", &[(Some(1.0), top)]);
        unreadable.image = Err("truncated".into());
        let mut bad_mask = raw("mask", &[(Some(1.0), top)]);
        bad_mask.items[0].mask = Err("pixel value 128".into());
        let occs = vec![
            raw("overlap", &[(Some(1.0), top), (Some(2.0), left)]),
            raw("empty", &[(Some(1.0), nothing)]),
            raw("zero", &[(Some(0.0), top)]),
            raw("none", &[]),
            unreadable,
            bad_mask,
            raw("ok", &[(Some(3.0), top)]),
            raw("ok", &[(Some(3.0), top)]),
        ];
        let (kept, rejected) = prune(occs, &PrunePolicy::default());
        assert_eq!(kept.len(), 1);
        let reasons: Vec<_> = rejected.iter().map(|r| r.reason.to_string()).collect();
        assert!(reasons[0].starts_with("overlapping masks"), "{reasons:?}");
        assert_eq!(reasons[1], "empty mask");
        assert!(reasons[2].starts_with("non-positive kcal"));
        assert_eq!(reasons[3], "no food items");
        assert!(reasons[4].starts_with("unreadable image"));
        assert!(reasons[5].starts_with("invalid mask"));
        assert_eq!(reasons[6], "duplicate occasion id");
    }

    #[test]
    fn rejection_report_serializes() {
        let r = Rejection {
            id: "x".into(),
            item: Some(0),
            reason: RejectionReason::MissingKcal,
        };
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, r#"{"id":"x","item":0,"reason":{"kind":"missing_kcal"}}"#);
    }
}
