//! Segmentation and thickness metrics.
//!
//! Accuracy and mean IoU are one-vs-rest per class and then averaged over a
//! class set `k`. By default `k` is the set of classes present in the ground
//! truth (background included); [`ClassUniverse::Fixed`] scores a fixed
//! `0..n` universe instead. Thickness MAE averages over the ground truth's
//! layer classes only, and a layer the prediction misses counts as zero
//! thickness.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::layerize::{mean_thickness, ThicknessReport};
use crate::types::{ClassId, LayerId, SemanticMap, BACKGROUND};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ClassCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub per_class: BTreeMap<ClassId, ClassCounts>,
}

/// Which classes enter the per-image averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ClassUniverse {
    /// Classes present in each image's ground truth.
    #[default]
    GroundTruth,
    /// Class ids `0..n`.
    Fixed(usize),
}

/// Filters and options an evaluation was run with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Filters {
    /// Keep only images whose ground truth has strictly more layers than this.
    pub min_layers: Option<usize>,
    /// Score only the `n` shallowest ground-truth layers.
    pub top_n: Option<usize>,
    pub class_universe: ClassUniverse,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub accuracy: f64,
    pub mean_iou: f64,
    pub thickness_mae_px: f64,
    pub k_classes_used: usize,
    pub filters_applied: Filters,
}

fn check_shapes(pred: &SemanticMap, gt: &SemanticMap) -> Result<()> {
    if pred.same_shape(gt) {
        Ok(())
    } else {
        Err(Error::Dimensions(alloc::format!(
            "prediction is {}x{}, ground truth is {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )))
    }
}

/// One-vs-rest confusion counts for each class in `classes`.
pub fn confusion(
    pred: &SemanticMap,
    gt: &SemanticMap,
    classes: &BTreeSet<ClassId>,
) -> Result<ConfusionCounts> {
    check_shapes(pred, gt)?;
    if classes.is_empty() {
        return Err(Error::Empty("class set"));
    }
    // Joint histogram, then per-class marginals.
    let mut joint = alloc::vec![0u64; 256 * 256];
    for (&p, &g) in pred.classes().iter().zip(gt.classes()) {
        joint[(p as usize) << 8 | g as usize] += 1;
    }
    let mut pred_count = [0u64; 256];
    let mut gt_count = [0u64; 256];
    for p in 0..256 {
        for g in 0..256 {
            let n = joint[p << 8 | g];
            pred_count[p] += n;
            gt_count[g] += n;
        }
    }
    let total = pred.classes().len() as u64;
    let per_class = classes
        .iter()
        .map(|&c| {
            let i = c as usize;
            let tp = joint[i << 8 | i];
            let fp = pred_count[i] - tp;
            let fn_ = gt_count[i] - tp;
            let tn = total - tp - fp - fn_;
            (c, ClassCounts { tp, tn, fp, fn_ })
        })
        .collect();
    Ok(ConfusionCounts { per_class })
}

/// Mean over classes of `(tp + tn) / total`.
pub fn accuracy(cc: &ConfusionCounts) -> Result<f64> {
    if cc.per_class.is_empty() {
        return Err(Error::Empty("class set"));
    }
    let sum: f64 = cc
        .per_class
        .values()
        .map(|c| (c.tp + c.tn) as f64 / c.total() as f64)
        .sum();
    Ok(sum / cc.per_class.len() as f64)
}

/// Mean over classes of `tp / (tp + fp + fn)`, skipping classes absent from
/// both maps.
pub fn mean_iou(cc: &ConfusionCounts) -> Result<f64> {
    let mut sum = 0.0;
    let mut k = 0usize;
    for c in cc.per_class.values() {
        let union = c.tp + c.fp + c.fn_;
        if union == 0 {
            continue;
        }
        sum += c.tp as f64 / union as f64;
        k += 1;
    }
    if k == 0 {
        return Err(Error::Empty("classes with a defined IoU"));
    }
    Ok(sum / k as f64)
}

/// Mean absolute thickness error over the ground truth's layers.
pub fn thickness_mae(pred: &ThicknessReport, gt: &ThicknessReport) -> Result<f64> {
    if gt.per_layer.is_empty() {
        return Err(Error::Empty("ground-truth layers"));
    }
    let sum: f64 = gt
        .per_layer
        .iter()
        .map(|(id, &t)| {
            let p = pred.per_layer.get(id).copied().unwrap_or(0.0);
            (p - t).abs()
        })
        .sum();
    Ok(sum / gt.per_layer.len() as f64)
}

/// Layers the prediction contains that the ground truth does not.
pub fn spurious_layers(pred: &ThicknessReport, gt: &ThicknessReport) -> Vec<LayerId> {
    pred.per_layer
        .keys()
        .filter(|id| !gt.per_layer.contains_key(id))
        .copied()
        .collect()
}

pub fn layer_count(gt: &SemanticMap) -> usize {
    gt.layer_classes().len()
}

/// Keeps pairs whose ground truth has strictly more than `min_layers` layers.
pub fn filter_by_layer_count<T, F>(items: &[T], gt_of: F, min_layers: usize) -> Vec<&T>
where
    F: Fn(&T) -> &SemanticMap,
{
    items
        .iter()
        .filter(|item| layer_count(gt_of(item)) > min_layers)
        .collect()
}

/// Masks every layer class except the `n` shallowest (smallest ids) present
/// in the ground truth, in both maps.
pub fn restrict_top_n(
    pred: &SemanticMap,
    gt: &SemanticMap,
    n: usize,
) -> Result<(SemanticMap, SemanticMap)> {
    check_shapes(pred, gt)?;
    if n == 0 {
        return Err(Error::InvalidArgument("top-n must be at least 1".into()));
    }
    let mut keep = [false; 256];
    keep[BACKGROUND as usize] = true;
    for c in gt.layer_classes().into_iter().take(n) {
        keep[c as usize] = true;
    }
    let mask = |m: &SemanticMap| {
        let classes = m
            .classes()
            .iter()
            .map(|&c| if keep[c as usize] { c } else { BACKGROUND })
            .collect();
        SemanticMap::new(m.height(), m.width(), classes)
    };
    Ok((mask(pred)?, mask(gt)?))
}

fn class_set(gt: &SemanticMap, universe: ClassUniverse) -> BTreeSet<ClassId> {
    match universe {
        ClassUniverse::GroundTruth => {
            let mut seen = [false; 256];
            for &c in gt.classes() {
                seen[c as usize] = true;
            }
            (0..=255u8).filter(|&c| seen[c as usize]).collect()
        }
        ClassUniverse::Fixed(n) => (0..n.min(256)).map(|c| c as ClassId).collect(),
    }
}

/// Scores one prediction. `filters.min_layers` is a corpus-level filter and
/// is only recorded here.
pub fn evaluate(pred: &SemanticMap, gt: &SemanticMap, filters: Filters) -> Result<EvalReport> {
    let (pred, gt) = match filters.top_n {
        Some(n) => restrict_top_n(pred, gt, n)?,
        None => {
            check_shapes(pred, gt)?;
            (pred.clone(), gt.clone())
        }
    };
    let classes = class_set(&gt, filters.class_universe);
    let cc = confusion(&pred, &gt, &classes)?;
    Ok(EvalReport {
        accuracy: accuracy(&cc)?,
        mean_iou: mean_iou(&cc)?,
        thickness_mae_px: thickness_mae(&mean_thickness(&pred), &mean_thickness(&gt))?,
        k_classes_used: classes.len(),
        filters_applied: filters,
    })
}

/// Unweighted mean of every metric; `k_classes_used` is the maximum.
pub fn aggregate(reports: &[EvalReport]) -> Result<EvalReport> {
    let first = reports.first().ok_or(Error::Empty("report list"))?;
    let n = reports.len() as f64;
    let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Ok(EvalReport {
        accuracy: mean(|r| r.accuracy),
        mean_iou: mean(|r| r.mean_iou),
        thickness_mae_px: mean(|r| r.thickness_mae_px),
        k_classes_used: reports.iter().map(|r| r.k_classes_used).max().unwrap_or(0),
        filters_applied: first.filters_applied,
    })
}

/// Applies the layer-count filter, scores each surviving pair and aggregates.
/// Returns the aggregate and the per-image reports in input order.
pub fn evaluate_corpus(
    pairs: &[(SemanticMap, SemanticMap)],
    filters: Filters,
) -> Result<(EvalReport, Vec<EvalReport>)> {
    let kept = filter_by_layer_count(pairs, |(_, gt)| gt, filters.min_layers.unwrap_or(0));
    let per_image = kept
        .into_iter()
        .map(|(pred, gt)| evaluate(pred, gt, filters))
        .collect::<Result<Vec<_>>>()?;
    Ok((aggregate(&per_image)?, per_image))
}
