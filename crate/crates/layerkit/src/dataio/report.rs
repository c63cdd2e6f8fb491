//! Evaluation reports as JSON.
//!
//! A single report is an object with the keys `accuracy`, `mean_iou`,
//! `thickness_mae_px`, `k_classes_used` and `filters_applied`, in that order.
//! Corpus reports append a `per_image` array. When the report was produced
//! with `--units cm`, `thickness_mae_cm` follows `filters_applied`.
//!
//! Floats are written in shortest round-trip form, so parsing a file back
//! yields bit-identical values.

use std::path::Path;

use layerkit_core::metrics::EvalReport;
use serde::{Deserialize, Serialize};

use super::{read_text, write_atomic, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    #[serde(flatten)]
    pub report: EvalReport,
    /// Image identifier, usually the ground-truth file name.
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness_mae_cm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    #[serde(flatten)]
    pub summary: EvalReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness_mae_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_image: Option<Vec<ImageReport>>,
}

impl ReportFile {
    pub fn single(report: EvalReport) -> Self {
        Self {
            summary: report,
            thickness_mae_cm: None,
            per_image: None,
        }
    }

    pub fn corpus(summary: EvalReport, per_image: Vec<ImageReport>) -> Self {
        Self {
            summary,
            thickness_mae_cm: None,
            per_image: Some(per_image),
        }
    }

    /// Adds centimetre MAE fields to the summary and every image.
    pub fn with_cm(mut self, cm_per_pixel: f64) -> Self {
        self.thickness_mae_cm = Some(self.summary.thickness_mae_px * cm_per_pixel);
        for r in self.per_image.iter_mut().flatten() {
            r.thickness_mae_cm = Some(r.report.thickness_mae_px * cm_per_pixel);
        }
        self
    }
}

pub fn encode(report: &ReportFile) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

pub fn decode(text: &str) -> Result<ReportFile> {
    Ok(serde_json::from_str(text)?)
}

pub fn read(path: &Path) -> Result<ReportFile> {
    decode(&read_text(path)?)
}

pub fn write(path: &Path, report: &ReportFile) -> Result<()> {
    write_atomic(path, encode(report)?.as_bytes())
}
