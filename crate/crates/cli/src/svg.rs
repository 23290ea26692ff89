//! Minimal self-contained SVG line plots: accumulated error as solid lines,
//! SSIM as dashed lines, one color per run.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::io_err;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineStyle {
    Solid,
    Dashed,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: LineStyle,
    pub color_index: usize,
}

const COLORS: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

const W: f64 = 860.0;
const H: f64 = 520.0;
const MARGIN: f64 = 64.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Render series sharing an x axis; y values are min-max scaled over all
/// series together.
pub fn line_plot(title: &str, x_label: &str, series: &[Series]) -> String {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            xs.push(x);
            ys.push(y);
        }
    }
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);
    let sx = |x: f64| MARGIN + (x - x_min) / (x_max - x_min).max(1e-300) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y_min) / (y_max - y_min).max(1e-300) * (H - 2.0 * MARGIN);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        escape(title)
    ));
    // Axes.
    out.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    ));
    out.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        H - 18.0,
        escape(x_label)
    ));
    for (frac, value) in [(0.0, y_min), (0.5, 0.5 * (y_min + y_max)), (1.0, y_max)] {
        let y = H - MARGIN - frac * (H - 2.0 * MARGIN);
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{value:.3e}</text>\n",
            MARGIN - 6.0,
            y + 3.0
        ));
    }

    for s in series {
        if s.points.is_empty() {
            continue;
        }
        let color = COLORS[s.color_index % COLORS.len()];
        let dash = match s.style {
            LineStyle::Solid => "",
            LineStyle::Dashed => " stroke-dasharray=\"7,4\"",
        };
        let path: Vec<String> =
            s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"{dash} points=\"{}\"/>\n",
            path.join(" ")
        ));
    }
    // Legend.
    for (k, s) in series.iter().enumerate() {
        let y = MARGIN + 16.0 * k as f64;
        let color = COLORS[s.color_index % COLORS.len()];
        let dash = match s.style {
            LineStyle::Solid => "",
            LineStyle::Dashed => " stroke-dasharray=\"7,4\"",
        };
        out.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"{color}\" stroke-width=\"1.6\"{dash}/>\n",
            x = W - MARGIN - 170.0,
            x2 = W - MARGIN - 140.0
        ));
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            escape(&s.label),
            x = W - MARGIN - 132.0,
            y = y + 3.5
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

pub fn write_svg(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let tmp = path.with_extension("svg.tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(content.as_bytes()).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(())
}
