//! CSV and SVG writers. Floats carry 17 significant digits.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::CliError;

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            text: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn floats(&mut self, xs: &[f64]) {
        self.row(&xs.iter().map(|x| fmt(*x)).collect::<Vec<_>>());
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf, CliError> {
        write_file(dir, name, &self.text)
    }
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Polyline chart of one or more series sharing the axes.
pub fn svg(title: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let (w, h, pad) = (640.0, 400.0, 48.0);
    let pts = series
        .iter()
        .flat_map(|s| s.1.iter())
        .filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let colors = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    ];
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{pad}" y="24" font-family="sans-serif" font-size="14">{title}</text>"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    for (k, (name, data)) in series.iter().enumerate() {
        let c = colors[k % colors.len()];
        let line: Vec<String> = data
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{c}" points="{}"/>"#,
            line.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{c}">{name}</text>"#,
            w - pad - 120.0,
            pad + 16.0 * (k as f64 + 1.0)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{pad}" y="{}" font-family="sans-serif" font-size="11">x: [{x0:.3e}, {x1:.3e}]  y: [{y0:.3e}, {y1:.3e}]</text>"#,
        h - 12.0
    );
    s.push_str("</svg>\n");
    s
}
