//! Published reference numbers, shown next to desk-scale results.

use serde::{Deserialize, Serialize};

const REGISTRY_JSON: &str = include_str!("../../data/reference_targets.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub method: String,
    pub pretrained: Option<bool>,
    pub mae: f64,
    pub mape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTable {
    pub table: u32,
    pub title: String,
    pub rows: Vec<ReferenceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRegistry {
    pub note: String,
    pub tables: Vec<ReferenceTable>,
}

impl ReferenceRegistry {
    pub fn builtin() -> Self {
        serde_json::from_str(REGISTRY_JSON).expect("checked-in reference registry is valid JSON")
    }

    pub fn table(&self, number: u32) -> Option<&ReferenceTable> {
        self.tables.iter().find(|t| t.table == number)
    }

    pub fn lookup(&self, table: u32, method: &str, pretrained: Option<bool>) -> Option<&ReferenceRow> {
        self.table(table)?
            .rows
            .iter()
            .find(|r| r.method == method && r.pretrained == pretrained)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_holds_the_published_values() {
        let reg = ReferenceRegistry::builtin();
        let get = |t, m, p| {
            let r = reg.lookup(t, m, p).unwrap_or_else(|| panic!("missing {t} {m}"));
            (r.mae, r.mape)
        };
        assert_eq!(get(1, "Ours", None), (150.5, 35.7));
        assert_eq!(get(1, "Grayscale", None), (183.5, 48.5));
        assert_eq!(get(1, "Image Only", None), (287.7, 61.2));
        assert_eq!(get(1, "Density Map + Image, LN + GN", None), (219.1, 54.9));
        assert_eq!(get(1, "Density Map + Image, LN", None), (208.4, 58.3));
        assert_eq!(get(2, "VGG16", Some(false)), (155.5, 37.9));
        assert_eq!(get(2, "Resnet18", Some(false)), (149.3, 35.4));
        assert_eq!(get(2, "Resnet50", Some(false)), (154.0, 34.5));
        assert_eq!(get(3, "Tensor Density Map", None), (166.3, 38.5));
        assert_eq!(get(3, "Grayscale", None), (183.5, 48.5));
    }
}
