//! SVG rendering of the (N, M) sup-norm grid.
//!
//! Cells are colored by `ln(value)` rescaled to the data's log range and
//! interpolated linearly between two fixed endpoints: `LOW_COLOR` for the
//! smallest value and `HIGH_COLOR` for the largest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{HarnessError, Result};
use crate::records::{MetricKind, MetricRecord};

pub const LOW_COLOR: [u8; 3] = [0xf7, 0xfb, 0xff];
pub const HIGH_COLOR: [u8; 3] = [0x08, 0x30, 0x6b];

const CELL_W: usize = 90;
const CELL_H: usize = 40;
const LEFT: usize = 70;
const TOP: usize = 50;

/// Interpolated `#rrggbb` color for `t` in `[0, 1]`.
pub fn color_at(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let mix = |i: usize| {
        let (a, b) = (LOW_COLOR[i] as f64, HIGH_COLOR[i] as f64);
        (a + t * (b - a)).round() as u8
    };
    format!("#{:02x}{:02x}{:02x}", mix(0), mix(1), mix(2))
}

/// Renders the per-cell mean sup-norm rows (`sup_norm` without a repeat).
pub fn heatmap_svg(records: &[MetricRecord]) -> String {
    let cells: BTreeMap<(usize, usize), f64> = records
        .iter()
        .filter(|r| r.metric == MetricKind::SupNorm && r.repeat.is_none())
        .filter_map(|r| Some(((r.n?, r.m?), r.value)))
        .collect();
    let ns: Vec<usize> = cells
        .keys()
        .map(|k| k.0)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let ms: Vec<usize> = cells
        .keys()
        .map(|k| k.1)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let logs: Vec<f64> = cells
        .values()
        .filter(|v| **v > 0.0)
        .map(|v| v.ln())
        .collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let width = LEFT + ns.len() * CELL_W + 20;
    let height = TOP + ms.len() * CELL_H + 50;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">mean sup-norm (log color scale)</text>"#,
        width / 2
    );
    // largest M on top, as in a conventional y axis
    for (row, &m) in ms.iter().rev().enumerate() {
        let y = TOP + row * CELL_H;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{m}</text>"#,
            LEFT - 8,
            y + CELL_H / 2 + 4
        );
        for (col, &n) in ns.iter().enumerate() {
            let x = LEFT + col * CELL_W;
            let Some(&v) = cells.get(&(n, m)) else {
                continue;
            };
            let t = if v > 0.0 && hi > lo {
                (v.ln() - lo) / (hi - lo)
            } else {
                0.0
            };
            let ink = if t > 0.5 { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                s,
                r##"<rect class="cell" x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{}" stroke="#ffffff"><title>N={n} M={m} sup-norm={v:e}</title></rect>"##,
                color_at(t)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{v:.3e}</text>"#,
                x + CELL_W / 2,
                y + CELL_H / 2 + 4
            );
        }
    }
    let axis_y = TOP + ms.len() * CELL_H;
    for (col, &n) in ns.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{n}</text>"#,
            LEFT + col * CELL_W + CELL_W / 2,
            axis_y + 18
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">N</text>"#,
        LEFT + ns.len() * CELL_W / 2,
        axis_y + 40
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {0})">M</text>"#,
        TOP + ms.len() * CELL_H / 2
    );
    s.push_str("</svg>\n");
    s
}

pub fn emit_heatmap_svg(records: &[MetricRecord], path: &Path) -> Result<()> {
    fs::write(path, heatmap_svg(records)).map_err(|e| HarnessError::io(path, e))
}
