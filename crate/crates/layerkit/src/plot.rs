//! Plot-ready data.
//!
//! Each kind produces a CSV (the primary product) and a minimal static SVG
//! drawn from the same numbers. Numbers are written in plain decimal
//! notation with shortest round-trip precision.

use std::fmt::Write as _;

use layerkit_core::layerize::mean_thickness;
use layerkit_core::sched::SchedulePoint;
use layerkit_core::{LayerMap, SemanticMap};

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 320.0;
const MARGIN: f64 = 20.0;

/// Fixed palette cycled by layer id.
const COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn color(id: usize) -> &'static str {
    COLORS[id % COLORS.len()]
}

fn svg_open(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    )
}

fn polyline(points: impl Iterator<Item = (f64, f64)>, stroke: &str) -> String {
    let coords: Vec<String> = points.map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
    format!(
        "<polyline fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        coords.join(" ")
    )
}

/// Maps `v` from `[lo, hi]` to the plot's vertical extent, top = `hi`.
fn scale_y(v: f64, lo: f64, hi: f64) -> f64 {
    let span = if hi > lo { hi - lo } else { 1.0 };
    SVG_H - MARGIN - (v - lo) / span * (SVG_H - 2.0 * MARGIN)
}

fn scale_x(f: f64) -> f64 {
    MARGIN + f * (SVG_W - 2.0 * MARGIN)
}

pub fn schedule_csv(points: &[SchedulePoint]) -> String {
    let mut out = String::from("fraction,lr,momentum\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.fraction, p.learning_rate, p.momentum);
    }
    out
}

/// Learning rate (blue) and momentum (orange), each scaled to its own range.
pub fn schedule_svg(points: &[SchedulePoint]) -> String {
    let range = |f: fn(&SchedulePoint) -> f64| {
        points
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    };
    let (lr_lo, lr_hi) = range(|p| p.learning_rate);
    let (m_lo, m_hi) = range(|p| p.momentum);
    let mut out = svg_open(SVG_W, SVG_H);
    out.push_str(&polyline(
        points.iter().map(|p| {
            (
                scale_x(p.fraction),
                scale_y(p.learning_rate, lr_lo.min(0.0), lr_hi),
            )
        }),
        color(0),
    ));
    out.push_str(&polyline(
        points
            .iter()
            .map(|p| (scale_x(p.fraction), scale_y(p.momentum, m_lo, m_hi))),
        color(1),
    ));
    out.push_str("</svg>\n");
    out
}

/// `(layer_id, thickness_px, pixel_count)` for every layer class present.
pub fn thickness_rows(map: &SemanticMap) -> Vec<(u8, f64, usize)> {
    let report = mean_thickness(map);
    let mut counts = [0usize; 256];
    for &c in map.classes() {
        counts[c as usize] += 1;
    }
    report
        .per_layer
        .iter()
        .map(|(&id, &t)| (id, t, counts[id as usize]))
        .collect()
}

pub fn thickness_csv(map: &SemanticMap) -> String {
    let mut out = String::from("layer_id,thickness_px,pixel_count\n");
    for (id, t, n) in thickness_rows(map) {
        let _ = writeln!(out, "{id},{t},{n}");
    }
    out
}

pub fn thickness_svg(map: &SemanticMap) -> String {
    let rows = thickness_rows(map);
    let max = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let slot = (SVG_W - 2.0 * MARGIN) / rows.len().max(1) as f64;
    let mut out = svg_open(SVG_W, SVG_H);
    for (i, (id, t, _)) in rows.iter().enumerate() {
        let top = scale_y(*t, 0.0, max);
        let _ = writeln!(
            out,
            "<rect x=\"{:.3}\" y=\"{top:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"{}\"><title>layer {id}: {t} px</title></rect>",
            MARGIN + i as f64 * slot + 0.1 * slot,
            0.8 * slot,
            SVG_H - MARGIN - top,
            color(*id as usize),
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One vertex per defined column, numbered from 0 within each layer.
pub fn overlay_csv(m: &LayerMap) -> String {
    let mut out = String::from("layer_id,vertex,col,row\n");
    for (id, rows) in m.iter() {
        let defined = rows
            .iter()
            .enumerate()
            .filter_map(|(c, r)| r.map(|r| (c, r)));
        for (vertex, (col, row)) in defined.enumerate() {
            let _ = writeln!(out, "{id},{vertex},{col},{row}");
        }
    }
    out
}

/// Layer curves in image coordinates (one SVG unit per pixel).
pub fn overlay_svg(m: &LayerMap, height: usize) -> String {
    let mut out = svg_open(m.width() as f64, height as f64);
    for (id, rows) in m.iter() {
        let pts = rows
            .iter()
            .enumerate()
            .filter_map(|(c, r)| r.map(|r| (c as f64 + 0.5, r as f64 + 0.5)));
        out.push_str(&polyline(pts, color(id as usize)));
    }
    out.push_str("</svg>\n");
    out
}
