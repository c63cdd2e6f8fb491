//! Shared domain types.
//!
//! Coordinates follow image convention: `row` (y) grows downward with depth,
//! `col` (x) runs along-track.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Layer identifier. Layer ids double as semantic class ids, so they fit in a byte.
pub type LayerId = u8;
/// Per-pixel class id in a [`SemanticMap`].
pub type ClassId = u8;
/// Class id reserved for pixels that belong to no layer.
pub const BACKGROUND: ClassId = 0;

pub const DEFAULT_CM_PER_PIXEL: f64 = 4.0;

/// 8-bit grayscale radar image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Radargram {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
    vertical_resolution_cm: f64,
}

impl Radargram {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        Self::with_resolution(height, width, pixels, DEFAULT_CM_PER_PIXEL)
    }

    pub fn with_resolution(
        height: usize,
        width: usize,
        pixels: Vec<u8>,
        vertical_resolution_cm: f64,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimensions(format!(
                "radargram must be non-empty, got {height}x{width}"
            )));
        }
        if pixels.len() != height * width {
            return Err(Error::Dimensions(format!(
                "{} pixels for a {height}x{width} radargram",
                pixels.len()
            )));
        }
        if !(vertical_resolution_cm.is_finite() && vertical_resolution_cm > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "vertical resolution must be positive, got {vertical_resolution_cm}"
            )));
        }
        Ok(Self {
            height,
            width,
            pixels,
            vertical_resolution_cm,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn vertical_resolution_cm(&self) -> f64 {
        self.vertical_resolution_cm
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }
}

/// Sparse layer annotations: for every layer, an optional row per column.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LayerMap {
    width: usize,
    layers: BTreeMap<LayerId, Vec<Option<u32>>>,
}

impl LayerMap {
    pub fn new(width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::Dimensions("layer map width must be positive".into()));
        }
        Ok(Self {
            width,
            layers: BTreeMap::new(),
        })
    }

    /// Adds or replaces a layer curve. `rows` must have one entry per column.
    pub fn insert(&mut self, id: LayerId, rows: Vec<Option<u32>>) -> Result<()> {
        if id == BACKGROUND {
            return Err(Error::InvalidLayerId(0));
        }
        if rows.len() != self.width {
            return Err(Error::Dimensions(format!(
                "layer {id} has {} columns, map width is {}",
                rows.len(),
                self.width
            )));
        }
        self.layers.insert(id, rows);
        Ok(())
    }

    /// Convenience for a layer defined at every column.
    pub fn insert_complete(&mut self, id: LayerId, rows: &[u32]) -> Result<()> {
        self.insert(id, rows.iter().copied().map(Some).collect())
    }

    pub fn remove(&mut self, id: LayerId) -> Option<Vec<Option<u32>>> {
        self.layers.remove(&id)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn contains(&self, id: LayerId) -> bool {
        self.layers.contains_key(&id)
    }

    pub fn layer(&self, id: LayerId) -> Option<&[Option<u32>]> {
        self.layers.get(&id).map(Vec::as_slice)
    }

    /// Layer ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = LayerId> + '_ {
        self.layers.keys().copied()
    }

    /// `(id, rows)` pairs in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (LayerId, &[Option<u32>])> + '_ {
        self.layers.iter().map(|(&id, rows)| (id, rows.as_slice()))
    }

    pub(crate) fn set(&mut self, id: LayerId, col: usize, row: u32) {
        let width = self.width;
        self.layers.entry(id).or_insert_with(|| vec![None; width])[col] = Some(row);
    }
}

/// A broken [`LayerMap`] invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// `lower` has a larger id than `upper` but does not lie strictly below it.
    Crossing {
        upper: LayerId,
        lower: LayerId,
        column: usize,
        upper_row: u32,
        lower_row: u32,
    },
}

/// Checks the stacking invariant: at every column, among the layers defined
/// there, a larger id means a strictly deeper row.
///
/// Only neighbouring defined layers are compared, which is sufficient since
/// strict ordering is transitive; each reported violation names the adjacent
/// pair at fault.
pub fn validate_layer_map(m: &LayerMap) -> Vec<Violation> {
    let mut out = Vec::new();
    for column in 0..m.width {
        let mut prev: Option<(LayerId, u32)> = None;
        for (id, rows) in m.iter() {
            let Some(row) = rows[column] else { continue };
            if let Some((upper, upper_row)) = prev {
                if row <= upper_row {
                    out.push(Violation::Crossing {
                        upper,
                        lower: id,
                        column,
                        upper_row,
                        lower_row: row,
                    });
                }
            }
            prev = Some((id, row));
        }
    }
    out
}

/// True iff the layer has a row at every column.
pub fn is_complete(m: &LayerMap, id: LayerId) -> Result<bool> {
    m.layer(id)
        .map(|rows| rows.iter().all(Option::is_some))
        .ok_or(Error::UnknownLayer(id))
}

/// Dense per-pixel class ids, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SemanticMap {
    height: usize,
    width: usize,
    classes: Vec<ClassId>,
}

impl SemanticMap {
    pub fn new(height: usize, width: usize, classes: Vec<ClassId>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimensions(format!(
                "semantic map must be non-empty, got {height}x{width}"
            )));
        }
        if classes.len() != height * width {
            return Err(Error::Dimensions(format!(
                "{} classes for a {height}x{width} semantic map",
                classes.len()
            )));
        }
        Ok(Self {
            height,
            width,
            classes,
        })
    }

    /// All-background map.
    pub fn background(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![BACKGROUND; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> ClassId {
        self.classes[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, class: ClassId) {
        self.classes[row * self.width + col] = class;
    }

    pub fn same_shape(&self, other: &SemanticMap) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Distinct non-background classes present, ascending.
    pub fn layer_classes(&self) -> Vec<ClassId> {
        let mut seen = [false; 256];
        for &c in &self.classes {
            seen[c as usize] = true;
        }
        (1..=255u8).filter(|&c| seen[c as usize]).collect()
    }

    pub fn into_classes(self) -> Vec<ClassId> {
        self.classes
    }
}

/// Crop rectangle; `x2` and `y2` are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CropBox {
    pub x1: usize,
    pub y1: usize,
    pub x2: usize,
    pub y2: usize,
}

impl CropBox {
    pub fn new(x1: usize, y1: usize, x2: usize, y2: usize) -> Result<Self> {
        if x1 >= x2 || y1 >= y2 {
            return Err(Error::InvalidArgument(format!(
                "degenerate crop box ({x1},{y1})-({x2},{y2})"
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn height(&self) -> usize {
        self.y2 - self.y1
    }

    pub fn width(&self) -> usize {
        self.x2 - self.x1
    }

    pub fn fits(&self, height: usize, width: usize) -> bool {
        self.x1 < self.x2 && self.y1 < self.y2 && self.x2 <= width && self.y2 <= height
    }

    pub(crate) fn check_fits(&self, height: usize, width: usize) -> Result<()> {
        if self.fits(height, width) {
            Ok(())
        } else {
            Err(Error::BoxOutOfBounds {
                x1: self.x1,
                y1: self.y1,
                x2: self.x2,
                y2: self.y2,
                height,
                width,
            })
        }
    }
}

/// Class universe of a segmentation problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSchema {
    num_classes: usize,
}

impl LabelSchema {
    /// 27 layer classes plus background.
    pub const DEFAULT_NUM_CLASSES: usize = 28;

    pub fn new(num_classes: usize) -> Result<Self> {
        if !(2..=256).contains(&num_classes) {
            return Err(Error::InvalidArgument(format!(
                "num_classes must be in 2..=256, got {num_classes}"
            )));
        }
        Ok(Self { num_classes })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn background_id(&self) -> ClassId {
        BACKGROUND
    }
}

impl Default for LabelSchema {
    fn default() -> Self {
        Self {
            num_classes: Self::DEFAULT_NUM_CLASSES,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flat(width: usize, rows: &[(LayerId, u32)]) -> LayerMap {
        let mut m = LayerMap::new(width).unwrap();
        for &(id, r) in rows {
            m.insert_complete(id, &vec![r; width]).unwrap();
        }
        m
    }

    #[test]
    fn ordered_layers_validate() {
        assert!(validate_layer_map(&flat(8, &[(1, 10), (2, 20)])).is_empty());
    }

    #[test]
    fn inverted_column_is_one_violation() {
        let mut m = LayerMap::new(6).unwrap();
        let mut upper = vec![Some(10); 6];
        let mut lower = vec![Some(20); 6];
        upper[3] = Some(20);
        lower[3] = Some(10);
        m.insert(1, upper).unwrap();
        m.insert(2, lower).unwrap();
        let v = validate_layer_map(&m);
        assert_eq!(
            v,
            vec![Violation::Crossing {
                upper: 1,
                lower: 2,
                column: 3,
                upper_row: 20,
                lower_row: 10
            }]
        );
    }

    #[test]
    fn touching_layers_are_a_violation() {
        assert_eq!(validate_layer_map(&flat(3, &[(1, 5), (2, 5)])).len(), 3);
    }

    #[test]
    fn completeness() {
        let mut m = flat(256, &[(1, 4)]);
        assert!(is_complete(&m, 1).unwrap());
        let mut rows = vec![Some(9); 256];
        rows[100] = None;
        m.insert(2, rows).unwrap();
        assert!(!is_complete(&m, 2).unwrap());
        assert_eq!(is_complete(&m, 3), Err(Error::UnknownLayer(3)));
    }

    #[test]
    fn constructors_reject_bad_shapes() {
        assert!(Radargram::new(2, 2, vec![0; 3]).is_err());
        assert!(Radargram::with_resolution(1, 1, vec![0], 0.0).is_err());
        assert!(SemanticMap::new(0, 2, vec![]).is_err());
        assert!(CropBox::new(3, 0, 3, 1).is_err());
        assert!(LabelSchema::new(1).is_err());
        assert_eq!(LabelSchema::default().num_classes(), 28);
        let mut m = LayerMap::new(4).unwrap();
        assert_eq!(m.insert(0, vec![None; 4]), Err(Error::InvalidLayerId(0)));
        assert!(m.insert(1, vec![None; 3]).is_err());
    }

    fn brute_force_ok(m: &LayerMap) -> bool {
        let layers: Vec<_> = m.iter().collect();
        for c in 0..m.width() {
            for (i, (_, a)) in layers.iter().enumerate() {
                for (_, b) in &layers[i + 1..] {
                    if let (Some(ra), Some(rb)) = (a[c], b[c]) {
                        if ra >= rb {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    prop_compose! {
        fn monotone_stack()(width in 1usize..12, n in 1usize..8)
            (gaps in proptest::collection::vec(proptest::collection::vec(1u32..5, width), n),
             holes in proptest::collection::vec(proptest::collection::vec(any::<bool>(), width), n),
             width in Just(width)) -> LayerMap {
            let mut m = LayerMap::new(width).unwrap();
            let mut depth = vec![0u32; width];
            for (i, (g, h)) in gaps.iter().zip(&holes).enumerate() {
                let rows = (0..width).map(|c| {
                    depth[c] += g[c];
                    (!h[c]).then_some(depth[c])
                }).collect();
                m.insert(i as LayerId + 1, rows).unwrap();
            }
            m
        }
    }

    prop_compose! {
        fn arbitrary_map()(width in 1usize..6, n in 0usize..5)
            (rows in proptest::collection::vec(proptest::collection::vec(proptest::option::of(0u32..6), width), n),
             width in Just(width)) -> LayerMap {
            let mut m = LayerMap::new(width).unwrap();
            for (i, r) in rows.into_iter().enumerate() {
                m.insert(i as LayerId + 1, r).unwrap();
            }
            m
        }
    }

    proptest! {
        #[test]
        fn monotone_stacks_have_no_violations(m in monotone_stack()) {
            prop_assert!(brute_force_ok(&m));
            prop_assert!(validate_layer_map(&m).is_empty());
        }

        #[test]
        fn validation_agrees_with_pairwise_check(m in arbitrary_map()) {
            prop_assert_eq!(validate_layer_map(&m).is_empty(), brute_force_ok(&m));
        }

        #[test]
        fn sorted_ids_sort_rows(m in monotone_stack()) {
            for c in 0..m.width() {
                let rows: Vec<u32> = m.iter().filter_map(|(_, r)| r[c]).collect();
                prop_assert!(rows.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
