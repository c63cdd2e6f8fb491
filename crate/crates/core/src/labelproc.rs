//! Turning sparse, partly incomplete layer annotations into cropped
//! per-pixel training labels.
//!
//! The pipeline is: drop every layer that is missing at any column, group
//! the surviving ids into runs of consecutive ids (at least two long), crop
//! a full-width horizontal band around each run with a five-row margin, and
//! fill every pixel between two layers with the upper layer's id.

use alloc::vec;
use alloc::vec::Vec;

use crate::types::{is_complete, CropBox, LayerId, LayerMap, Radargram, SemanticMap, BACKGROUND};
use crate::{Error, Result};

/// Rows of context kept above the peak and below the valley of a crop.
pub const CROP_MARGIN: usize = 5;

/// A run of consecutive layer ids `top..=bottom`, at least two long.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConsecutiveSet {
    top: LayerId,
    bottom: LayerId,
}

impl ConsecutiveSet {
    pub fn new(top: LayerId, bottom: LayerId) -> Result<Self> {
        if top == 0 || bottom <= top {
            return Err(Error::InvalidArgument(alloc::format!(
                "consecutive set needs 0 < top < bottom, got {top}..={bottom}"
            )));
        }
        Ok(Self { top, bottom })
    }

    pub fn top_id(&self) -> LayerId {
        self.top
    }

    pub fn bottom_id(&self) -> LayerId {
        self.bottom
    }

    pub fn len(&self) -> usize {
        (self.bottom - self.top) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, id: LayerId) -> bool {
        (self.top..=self.bottom).contains(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = LayerId> {
        self.top..=self.bottom
    }
}

/// One cropped training example, before semantic filling.
#[derive(Debug, Clone, PartialEq)]
pub struct CropResult {
    pub bbox: CropBox,
    pub image: Radargram,
    /// Layers of the set, rows relative to the crop's top edge.
    pub layers: LayerMap,
    pub source_set: ConsecutiveSet,
}

/// Drops every layer that is missing at one or more columns.
pub fn remove_incomplete(m: &LayerMap) -> LayerMap {
    let mut out = m.clone();
    for id in m.ids() {
        if !is_complete(m, id).unwrap_or(false) {
            out.remove(id);
        }
    }
    out
}

/// Maximal runs of step-1 ids, singletons discarded, in ascending order.
pub fn consecutive_sets(m: &LayerMap) -> Vec<ConsecutiveSet> {
    let mut sets = Vec::new();
    let mut run: Option<(LayerId, LayerId)> = None;
    for id in m.ids() {
        run = match run {
            Some((top, bottom)) if bottom.checked_add(1) == Some(id) => Some((top, id)),
            Some((top, bottom)) => {
                if bottom > top {
                    sets.push(ConsecutiveSet { top, bottom });
                }
                Some((id, id))
            }
            None => Some((id, id)),
        };
    }
    if let Some((top, bottom)) = run {
        if bottom > top {
            sets.push(ConsecutiveSet { top, bottom });
        }
    }
    sets
}

fn complete_rows(m: &LayerMap, id: LayerId) -> Result<impl Iterator<Item = u32> + '_> {
    let rows = m.layer(id).ok_or(Error::UnknownLayer(id))?;
    if let Some(column) = rows.iter().position(Option::is_none) {
        return Err(Error::IncompleteLayer { layer: id, column });
    }
    Ok(rows.iter().map(|r| r.unwrap_or_default()))
}

/// Shallowest row of the set's top layer and deepest row of its bottom layer.
pub fn peak_and_valley(s: &ConsecutiveSet, m: &LayerMap) -> Result<(u32, u32)> {
    for id in s.ids() {
        if !m.contains(id) {
            return Err(Error::UnknownLayer(id));
        }
    }
    let peak = complete_rows(m, s.top)?.min().unwrap_or(0);
    let valley = complete_rows(m, s.bottom)?.max().unwrap_or(0);
    Ok((peak, valley))
}

/// Full-width crop box spanning `peak - 5 ..= valley + 5`, clamped to the image.
pub fn crop_box(
    s: &ConsecutiveSet,
    m: &LayerMap,
    image_height: usize,
    image_width: usize,
) -> Result<CropBox> {
    let (peak, valley) = peak_and_valley(s, m)?;
    if peak >= valley {
        return Err(Error::Crossing { peak, valley });
    }
    let y1 = (peak as usize).saturating_sub(CROP_MARGIN);
    let y2 = image_height.min(valley as usize + CROP_MARGIN + 1);
    let bbox = CropBox::new(0, y1, image_width, y2).map_err(|_| Error::BoxOutOfBounds {
        x1: 0,
        y1,
        x2: image_width,
        y2,
        height: image_height,
        width: image_width,
    })?;
    bbox.check_fits(image_height, image_width)?;
    Ok(bbox)
}

/// Cuts `bbox` out of the image and re-bases the set's layer rows to it.
pub fn crop(
    image: &Radargram,
    m: &LayerMap,
    bbox: CropBox,
    s: &ConsecutiveSet,
) -> Result<CropResult> {
    bbox.check_fits(image.height(), image.width())?;
    if m.width() != image.width() {
        return Err(Error::Dimensions(alloc::format!(
            "layer map width {} differs from image width {}",
            m.width(),
            image.width()
        )));
    }

    let crop_width = bbox.width();
    let mut pixels = Vec::with_capacity(bbox.height() * crop_width);
    for row in bbox.y1..bbox.y2 {
        let start = row * image.width() + bbox.x1;
        pixels.extend_from_slice(&image.pixels()[start..start + crop_width]);
    }
    let cropped = Radargram::with_resolution(
        bbox.height(),
        crop_width,
        pixels,
        image.vertical_resolution_cm(),
    )?;

    let mut layers = LayerMap::new(crop_width)?;
    for id in s.ids() {
        let rows = m.layer(id).ok_or(Error::UnknownLayer(id))?;
        let mut rebased = Vec::with_capacity(crop_width);
        for (i, r) in rows[bbox.x1..bbox.x2].iter().enumerate() {
            let column = bbox.x1 + i;
            let row = r.ok_or(Error::IncompleteLayer { layer: id, column })?;
            if (row as usize) < bbox.y1 || (row as usize) >= bbox.y2 {
                return Err(Error::RowOutsideBox {
                    layer: id,
                    column,
                    row,
                    y1: bbox.y1,
                    y2: bbox.y2,
                });
            }
            rebased.push(Some(row - bbox.y1 as u32));
        }
        layers.insert(id, rebased)?;
    }

    Ok(CropResult {
        bbox,
        image: cropped,
        layers,
        source_set: *s,
    })
}

/// Dense labels for a crop: background above the first layer, then each
/// layer's id from its row down to the next layer; the bottom layer's id
/// extends to the bottom edge.
pub fn semantic_fill(c: &CropResult) -> Result<SemanticMap> {
    let height = c.image.height();
    let width = c.image.width();
    let mut classes = vec![BACKGROUND; height * width];
    let curves: Vec<(LayerId, &[Option<u32>])> = c.layers.iter().collect();

    for col in 0..width {
        let mut bounds = Vec::with_capacity(curves.len());
        for &(id, rows) in &curves {
            let row = rows
                .get(col)
                .copied()
                .flatten()
                .ok_or(Error::IncompleteLayer {
                    layer: id,
                    column: col,
                })?;
            bounds.push((id, row as usize));
        }
        for (i, &(id, start)) in bounds.iter().enumerate() {
            let end = bounds.get(i + 1).map_or(height, |&(_, next)| next);
            if start >= end || start >= height {
                return Err(Error::Crossing {
                    peak: start as u32,
                    valley: end as u32,
                });
            }
            for row in start..end {
                classes[row * width + col] = id;
            }
        }
    }
    SemanticMap::new(height, width, classes)
}

/// The full chain from raw annotations to `(crop, labels)` pairs, one per
/// consecutive set, top to bottom.
pub fn preprocess(image: &Radargram, m: &LayerMap) -> Result<Vec<(CropResult, SemanticMap)>> {
    if m.width() != image.width() {
        return Err(Error::Dimensions(alloc::format!(
            "layer map width {} differs from image width {}",
            m.width(),
            image.width()
        )));
    }
    let cleaned = remove_incomplete(m);
    consecutive_sets(&cleaned)
        .iter()
        .map(|s| {
            let bbox = crop_box(s, &cleaned, image.height(), image.width())?;
            let c = crop(image, &cleaned, bbox, s)?;
            let labels = semantic_fill(&c)?;
            Ok((c, labels))
        })
        .collect()
}
