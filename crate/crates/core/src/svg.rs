//! Minimal deterministic SVG charts.
//!
//! Output is plain text on a fixed 800×600 canvas with coordinates printed to
//! two decimals, so identical inputs give identical bytes.

use std::fmt::Write;

use crate::format::fmt_sig;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 40.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

/// Palette cycled by series or group index.
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ScatterPoint {
    pub label: String,
    /// Colour group, e.g. the variable a category belongs to.
    pub group: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    /// `None` leaves a gap.
    pub values: Vec<Option<f64>>,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Axis range padded by 5%, widened when degenerate.
fn range(values: impl Iterator<Item = f64>, include_zero: bool) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if include_zero {
        lo = lo.min(0.0);
        hi = hi.max(0.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo.abs() > 0.0 { lo.abs() * 0.1 } else { 1.0 };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

/// Frame, ticks and axis titles. `x_labels` replaces numeric x ticks.
fn axes(out: &mut String, f: &Frame, x_title: &str, y_title: &str, x_labels: Option<&[(f64, String)]>) {
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for k in 0..=TICKS {
        let v = f.y.0 + (f.y.1 - f.y.0) * k as f64 / TICKS as f64;
        let py = f.py(v);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            tick_label(v)
        );
    }
    let mut x_tick = |px: f64, label: &str| {
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 20.0,
            escape(label)
        );
    };
    match x_labels {
        Some(labels) => {
            for (x, label) in labels {
                x_tick(f.px(*x), label);
            }
        }
        None => {
            for k in 0..=TICKS {
                let v = f.x.0 + (f.x.1 - f.x.0) * k as f64 / TICKS as f64;
                x_tick(f.px(v), &tick_label(v));
            }
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(x_title)
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_title)
    );
}

fn tick_label(v: f64) -> String {
    // Four significant digits keep tick text short.
    let r = if v == 0.0 { 0.0 } else { format!("{v:.3e}").parse::<f64>().unwrap_or(v) };
    fmt_sig(r)
}

/// Labelled scatter plot, with dashed zero lines when the origin is in view.
pub fn scatter(title: &str, x_title: &str, y_title: &str, points: &[ScatterPoint], include_origin: bool) -> String {
    let f = Frame {
        x: range(points.iter().map(|p| p.x), include_origin),
        y: range(points.iter().map(|p| p.y), include_origin),
    };
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, x_title, y_title, None);
    if f.x.0 < 0.0 && f.x.1 > 0.0 {
        let px = f.px(0.0);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{MARGIN_TOP:.2}" x2="{px:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4 4"/>"##,
            HEIGHT - MARGIN_BOTTOM
        );
    }
    if f.y.0 < 0.0 && f.y.1 > 0.0 {
        let py = f.py(0.0);
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN_LEFT:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#999" stroke-dasharray="4 4"/>"##,
            WIDTH - MARGIN_RIGHT
        );
    }
    for p in points.iter().filter(|p| p.x.is_finite() && p.y.is_finite()) {
        let (px, py) = (f.px(p.x), f.py(p.y));
        let color = COLORS[p.group % COLORS.len()];
        let _ = writeln!(
            out,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="4" fill="{color}"/><text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            px + 6.0,
            py - 6.0,
            escape(&p.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Line chart of several series sharing an x axis of period labels.
/// Roughly ten evenly spaced periods get tick labels.
pub fn line_chart(title: &str, y_title: &str, periods: &[String], series: &[Series]) -> String {
    let n = periods.len().max(1);
    let f = Frame {
        x: (0.0, (n - 1).max(1) as f64),
        y: range(series.iter().flat_map(|s| s.values.iter().flatten().copied()), false),
    };
    let step = n.div_ceil(10).max(1);
    let labels: Vec<(f64, String)> = periods
        .iter()
        .enumerate()
        .filter(|(i, _)| i % step == 0)
        .map(|(i, p)| (i as f64, p.clone()))
        .collect();
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, "period", y_title, Some(&labels));
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut path = String::new();
        let mut pen_down = false;
        for (i, v) in s.values.iter().enumerate() {
            match v {
                Some(v) if v.is_finite() => {
                    let cmd = if pen_down { 'L' } else { 'M' };
                    let _ = write!(path, "{cmd}{:.2} {:.2} ", f.px(i as f64), f.py(*v));
                    pen_down = true;
                }
                _ => pen_down = false,
            }
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.trim_end()
        );
        let ly = MARGIN_TOP + 15.0 + 18.0 * k as f64;
        let lx = WIDTH - MARGIN_RIGHT - 150.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}
