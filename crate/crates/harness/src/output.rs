//! CSV and static SVG emission.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{HarnessError, Result};

/// Writes `records` with a header row; refuses to create a file for an empty list.
pub fn emit_csv<T: Serialize>(records: &[T], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(HarnessError::EmptyOutput(path.display().to_string()));
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Cells in `[0, 1]`, `values[row][col]`; 1 renders white and 0 black.
#[derive(Clone, Debug)]
pub struct Heatmap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_ticks: Vec<String>,
    pub y_ticks: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// `rgb(v, v, v)` with `v = round(255 * fraction)`.
pub fn shade(fraction: f64) -> String {
    let v = (255.0 * fraction.clamp(0.0, 1.0)).round() as u8;
    format!("rgb({v},{v},{v})")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn emit_svg_heatmap(map: &Heatmap, path: &Path) -> Result<()> {
    let rows = map.values.len();
    let cols = map.values.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(HarnessError::EmptyOutput(path.display().to_string()));
    }
    let (cell, left, top) = (40.0, 90.0, 40.0);
    let width = left + cell * cols as f64 + 20.0;
    let height = top + cell * rows as f64 + 60.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, width / 2.0, escape(&map.title));
    for (r, row) in map.values.iter().enumerate() {
        // first row drawn at the bottom
        let y = top + cell * (rows - 1 - r) as f64;
        for (c, &v) in row.iter().enumerate() {
            let x = left + cell * c as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}" stroke="gray" stroke-width="0.5"/>"#,
                shade(v)
            );
        }
        if let Some(t) = map.y_ticks.get(r) {
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, left - 5.0, y + cell / 2.0 + 4.0, escape(t));
        }
    }
    for (c, t) in map.x_ticks.iter().enumerate() {
        let x = left + cell * c as f64 + cell / 2.0;
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, top + cell * rows as f64 + 15.0, escape(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + cell * cols as f64 / 2.0, height - 12.0, escape(&map.x_label));
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        top + cell * rows as f64 / 2.0,
        top + cell * rows as f64 / 2.0,
        escape(&map.y_label)
    );
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    /// `(x, y, optional (low, high) error bar)`.
    pub points: Vec<(f64, f64, Option<(f64, f64)>)>,
}

#[derive(Clone, Debug)]
pub struct Scatter {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub fn emit_svg_scatter(plot: &Scatter, path: &Path) -> Result<()> {
    let pts: Vec<(f64, f64)> = plot
        .series
        .iter()
        .flat_map(|s| {
            s.points.iter().flat_map(|&(x, y, e)| {
                let mut v = vec![(x, y)];
                if let Some((lo, hi)) = e {
                    v.push((x, lo));
                    v.push((x, hi));
                }
                v
            })
        })
        .collect();
    if pts.is_empty() {
        return Err(HarnessError::EmptyOutput(path.display().to_string()));
    }
    let ty = |y: f64| if plot.log_y { y.max(1e-300).log10() } else { y };
    let (xmin, xmax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (ymin, ymax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(ty(p.1)), b.max(ty(p.1))));
    let (xmin, xmax) = if xmax > xmin { (xmin, xmax) } else { (xmin - 1.0, xmax + 1.0) };
    let (ymin, ymax) = if ymax > ymin { (ymin, ymax) } else { (ymin - 1.0, ymax + 1.0) };
    let (w, h, left, top, pw, ph) = (640.0, 420.0, 70.0, 40.0, 520.0, 320.0);
    let px = |x: f64| left + pw * (x - xmin) / (xmax - xmin);
    let py = |y: f64| top + ph * (1.0 - (ty(y) - ymin) / (ymax - ymin));

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, w / 2.0, escape(&plot.title));
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = xmin + f * (xmax - xmin);
        let yv = ymin + f * (ymax - ymin);
        let ylab = if plot.log_y { format!("1e{yv:.1}") } else { format!("{yv:.3}") };
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xv:.0}</text>"#, left + f * pw, top + ph + 15.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{ylab}</text>"#, left - 5.0, top + ph * (1.0 - f) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 25.0, escape(&plot.x_label));
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(&plot.y_label)
    );
    for (i, series) in plot.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for &(x, y, e) in &series.points {
            if let Some((lo, hi)) = e {
                let _ = writeln!(s, r#"<line x1="{0}" x2="{0}" y1="{1}" y2="{2}" stroke="{color}"/>"#, px(x), py(lo), py(hi));
            }
            let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{color}">{}</text>"#, left + 10.0, top + 15.0 + 14.0 * i as f64, escape(&series.name));
    }
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}
