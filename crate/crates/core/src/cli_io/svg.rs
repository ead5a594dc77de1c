//! Self-contained SVG line plots with fixed-precision coordinates.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::phase_plane::{BUCHDAHL_W2, Z};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(name: &str, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { name: name.into(), x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log10,
    /// asinh(y), readable across a sign change.
    Asinh,
}

impl Scale {
    fn map(&self, v: f64) -> f64 {
        match self {
            Scale::Linear => v,
            Scale::Log10 => v.log10(),
            Scale::Asinh => v.asinh(),
        }
    }

    fn suffix(&self) -> &'static str {
        match self {
            Scale::Linear => "",
            Scale::Log10 => " (log10)",
            Scale::Asinh => " (asinh)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Lines,
    /// Markers plus a horizontal zero line.
    Ladder,
    /// (w1, w2) portrait with triangle D and the sink Z.
    Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub kind: PlotKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
}

impl PlotStyle {
    pub fn new(kind: PlotKind, title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            kind,
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Linear,
        }
    }

    pub fn scales(mut self, x: Scale, y: Scale) -> Self {
        self.x_scale = x;
        self.y_scale = y;
        self
    }
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let d = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - d, hi + d)
    }
}

/// Render `series` as one SVG document. Identical input gives identical bytes.
pub fn emit_svg(series: &[Series], style: &PlotStyle) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Usage("no series to plot".into()));
    }
    let mut mapped = Vec::with_capacity(series.len());
    for s in series {
        if s.x.len() != s.y.len() {
            return Err(Error::Usage(format!("series {:?}: x and y lengths differ", s.name)));
        }
        if s.x.len() < 2 {
            return Err(Error::Usage(format!("series {:?} has fewer than 2 points", s.name)));
        }
        let pts: Vec<(f64, f64)> = s
            .x
            .iter()
            .zip(&s.y)
            .map(|(&x, &y)| (style.x_scale.map(x), style.y_scale.map(y)))
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        if pts.len() < 2 {
            return Err(Error::Usage(format!("series {:?} has fewer than 2 finite points", s.name)));
        }
        mapped.push(pts);
    }

    let mut xs: Vec<f64> = mapped.iter().flatten().map(|p| p.0).collect();
    let mut ys: Vec<f64> = mapped.iter().flatten().map(|p| p.1).collect();
    match style.kind {
        PlotKind::Phase => {
            xs.extend([0.0, BUCHDAHL_W2]);
            ys.extend([0.0, BUCHDAHL_W2]);
        }
        PlotKind::Ladder => ys.push(0.0),
        PlotKind::Lines => {}
    }
    let (x0, x1) = padded(xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = padded(ys.iter().copied().fold(f64::INFINITY, f64::min), ys.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let f = Frame { x0, x1, y0, y1 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        esc(&style.title)
    );
    // Frame and ticks.
    let (l, r, t, b) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        s,
        r#"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    for i in 0..=5 {
        let u = i as f64 / 5.0;
        let xv = x0 + u * (x1 - x0);
        let yv = y0 + u * (y1 - y0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{b:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, b + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{xv:.3e}</text>"#, b + 18.0);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{py:.2}" x2="{l:.2}" y2="{py:.2}" stroke="black"/>"#, l - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.3e}</text>"#, l - 8.0, py + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        H - 15.0,
        esc(&format!("{}{}", style.x_label, style.x_scale.suffix()))
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        esc(&format!("{}{}", style.y_label, style.y_scale.suffix()))
    );

    match style.kind {
        PlotKind::Phase => {
            let q = BUCHDAHL_W2;
            let _ = writeln!(
                s,
                r##"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="#eeeeee" stroke="gray" stroke-dasharray="4 3"/>"##,
                f.px(0.0),
                f.py(0.0),
                f.px(0.0),
                f.py(q),
                f.px(q),
                f.py(q)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" fill="gray">D</text>"#,
                f.px(q / 6.0),
                f.py(0.8 * q)
            );
        }
        PlotKind::Ladder => {
            let py = f.py(0.0);
            let _ = writeln!(s, r#"<line x1="{l:.2}" y1="{py:.2}" x2="{r:.2}" y2="{py:.2}" stroke="gray" stroke-dasharray="4 3"/>"#);
        }
        PlotKind::Lines => {}
    }

    for (i, (pts, ser)) in mapped.iter().zip(series).enumerate() {
        let c = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (j, (x, y)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2}", if j == 0 { "M" } else { " L" }, f.px(*x), f.py(*y));
        }
        let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{c}" stroke-width="1.2"/>"#);
        if style.kind == PlotKind::Ladder {
            for (x, y) in pts {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, f.px(*x), f.py(*y));
            }
        }
        let ly = TOP + 16.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{c}" stroke-width="2"/>"#, r - 150.0, ly - 4.0, r - 130.0, ly - 4.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, r - 125.0, esc(&ser.name));
    }

    if style.kind == PlotKind::Phase {
        let (zx, zy) = (f.px(Z[0]), f.py(Z[1]));
        let _ = writeln!(s, r#"<circle cx="{zx:.2}" cy="{zy:.2}" r="4" fill="black"/>"#);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">Z</text>"#, zx + 6.0, zy - 6.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}
