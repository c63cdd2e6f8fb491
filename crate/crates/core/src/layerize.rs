//! Recovering layer curves and thicknesses from dense class maps.

use alloc::collections::BTreeMap;

use crate::types::{LayerId, LayerMap, SemanticMap, BACKGROUND, DEFAULT_CM_PER_PIXEL};

/// Mean per-layer thickness of a class map, in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ThicknessReport {
    pub per_layer: BTreeMap<LayerId, f64>,
    pub width: usize,
    pub unit_cm_per_pixel: f64,
}

/// Keeps, per column, the topmost pixel of each class; every later
/// occurrence of the same class in that column is treated as background.
pub fn semantic_to_layers(s: &SemanticMap) -> LayerMap {
    let width = s.width();
    let mut out = LayerMap::new(width).expect("semantic maps are never empty");
    for col in 0..width {
        let mut seen = [false; 256];
        for row in 0..s.height() {
            let class = s.get(row, col);
            if class == BACKGROUND || seen[class as usize] {
                continue;
            }
            seen[class as usize] = true;
            out.set(class, col, row as u32);
        }
    }
    out
}

/// Pixel count of each layer class divided by the map width.
pub fn mean_thickness(s: &SemanticMap) -> ThicknessReport {
    mean_thickness_with_unit(s, DEFAULT_CM_PER_PIXEL)
}

pub fn mean_thickness_with_unit(s: &SemanticMap, unit_cm_per_pixel: f64) -> ThicknessReport {
    let mut counts = [0usize; 256];
    for &c in s.classes() {
        counts[c as usize] += 1;
    }
    let width = s.width();
    let per_layer = (1..=255u8)
        .filter(|&c| counts[c as usize] > 0)
        .map(|c| (c, counts[c as usize] as f64 / width as f64))
        .collect();
    ThicknessReport {
        per_layer,
        width,
        unit_cm_per_pixel,
    }
}

pub fn thickness_cm(r: &ThicknessReport) -> BTreeMap<LayerId, f64> {
    r.per_layer
        .iter()
        .map(|(&id, &t)| (id, t * r.unit_cm_per_pixel))
        .collect()
}
