//! Minimal self-contained SVG line/scatter plots.

use std::fmt::Write;

const PALETTE: [&str; 10] =
    ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Square,
    Cross,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub dashed: bool,
    pub width: f64,
    /// Markers instead of a connecting line.
    pub marker: Option<(Marker, f64)>,
    pub label: Option<String>,
}

impl Series {
    pub fn line(points: Vec<(f64, f64)>, color: &'static str) -> Self {
        Series { points, color, dashed: false, width: 1.2, marker: None, label: None }
    }

    pub fn markers(points: Vec<(f64, f64)>, color: &'static str, marker: Marker, size: f64) -> Self {
        Series { points, color, dashed: false, width: 1.0, marker: Some((marker, size)), label: None }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }

    pub fn width(mut self, width: f64) -> Self {
        self.width = width;
        self
    }

    pub fn label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl Plot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Plot { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: Vec::new() }
    }

    pub fn push(&mut self, series: Series) {
        self.series.push(series);
    }

    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for &(px, py) in self.series.iter().flat_map(|s| &s.points) {
            if px.is_finite() && py.is_finite() {
                x = (x.0.min(px), x.1.max(px));
                y = (y.0.min(py), y.1.max(py));
            }
        }
        (pad(x), pad(y))
    }

    fn render(&self, out: &mut String, left: f64, top: f64, width: f64, height: f64) {
        const ML: f64 = 62.0;
        const MR: f64 = 14.0;
        const MT: f64 = 28.0;
        const MB: f64 = 44.0;
        let (xr, yr) = self.bounds();
        let (x0, y0) = (left + ML, top + MT);
        let (w, h) = (width - ML - MR, height - MT - MB);
        let sx = |x: f64| x0 + (x - xr.0) / (xr.1 - xr.0) * w;
        let sy = |y: f64| y0 + h - (y - yr.0) / (yr.1 - yr.0) * h;

        let _ = writeln!(out, r#"<g font-family="sans-serif" font-size="11">"#);
        let _ = writeln!(
            out,
            r#"<rect x="{x0:.1}" y="{y0:.1}" width="{w:.1}" height="{h:.1}" fill="white" stroke="black" stroke-width="0.8"/>"#
        );
        for t in ticks(xr) {
            let px = sx(t);
            let _ = writeln!(
                out,
                r##"<line x1="{px:.1}" y1="{y0:.1}" x2="{px:.1}" y2="{:.1}" stroke="#ddd" stroke-width="0.5"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
                y0 + h,
                y0 + h + 14.0,
                tick_label(t)
            );
        }
        for t in ticks(yr) {
            let py = sy(t);
            let _ = writeln!(
                out,
                r##"<line x1="{x0:.1}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd" stroke-width="0.5"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
                x0 + w,
                x0 - 4.0,
                py + 4.0,
                tick_label(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
            x0 + w / 2.0,
            top + 18.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x0 + w / 2.0,
            y0 + h + 32.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
            left + 16.0,
            y0 + h / 2.0,
            left + 16.0,
            y0 + h / 2.0,
            escape(&self.y_label)
        );

        let _ = writeln!(
            out,
            r#"<clipPath id="clip{}"><rect x="{x0:.1}" y="{y0:.1}" width="{w:.1}" height="{h:.1}"/></clipPath><g clip-path="url(#clip{})">"#,
            clip_id(left, top),
            clip_id(left, top)
        );
        for s in &self.series {
            let finite = s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite());
            match s.marker {
                None => {
                    let mut d = String::new();
                    for (i, &(x, y)) in finite.enumerate() {
                        let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { 'M' } else { 'L' }, sx(x), sy(y));
                    }
                    if d.is_empty() {
                        continue;
                    }
                    let dash = if s.dashed { r#" stroke-dasharray="5,3""# } else { "" };
                    let _ = writeln!(
                        out,
                        r#"<path d="{}" fill="none" stroke="{}" stroke-width="{}"{dash}/>"#,
                        d.trim_end(),
                        s.color,
                        s.width
                    );
                }
                Some((marker, r)) => {
                    for &(x, y) in finite {
                        let (px, py) = (sx(x), sy(y));
                        let _ = match marker {
                            Marker::Circle => writeln!(
                                out,
                                r#"<circle cx="{px:.2}" cy="{py:.2}" r="{r}" fill="none" stroke="{}" stroke-width="{}"/>"#,
                                s.color, s.width
                            ),
                            Marker::Square => writeln!(
                                out,
                                r#"<rect x="{:.2}" y="{:.2}" width="{}" height="{}" fill="{}"/>"#,
                                px - r,
                                py - r,
                                2.0 * r,
                                2.0 * r,
                                s.color
                            ),
                            Marker::Cross => writeln!(
                                out,
                                r#"<path d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="{}" stroke-width="{}"/>"#,
                                px - r,
                                py - r,
                                px + r,
                                py + r,
                                px - r,
                                py + r,
                                px + r,
                                py - r,
                                s.color,
                                s.width
                            ),
                        };
                    }
                }
            }
        }
        let _ = writeln!(out, "</g>");

        let mut ly = y0 + 12.0;
        for s in self.series.iter().filter(|s| s.label.is_some()) {
            let dash = if s.dashed { r#" stroke-dasharray="5,3""# } else { "" };
            let _ = writeln!(
                out,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
                x0 + w - 110.0,
                ly - 4.0,
                x0 + w - 90.0,
                ly - 4.0,
                s.color,
                x0 + w - 86.0,
                ly,
                escape(s.label.as_deref().unwrap_or_default())
            );
            ly += 14.0;
        }
        let _ = writeln!(out, "</g>");
    }
}

/// Lays `plots` out row-major in `columns` columns of `cell` size.
pub fn figure(plots: &[Plot], columns: usize, cell: (f64, f64)) -> String {
    let columns = columns.max(1);
    let rows = plots.len().div_ceil(columns).max(1);
    let (cw, ch) = cell;
    let (width, height) = (cw * columns as f64, ch * rows as f64);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, plot) in plots.iter().enumerate() {
        let (r, c) = (i / columns, i % columns);
        plot.render(&mut out, c as f64 * cw, r as f64 * ch, cw, ch);
    }
    out.push_str("</svg>\n");
    out
}

fn clip_id(left: f64, top: f64) -> String {
    format!("{}_{}", left as i64, top as i64)
}

fn pad((lo, hi): (f64, f64)) -> (f64, f64) {
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span <= 1e-12 * lo.abs().max(hi.abs()).max(1.0) {
        let d = 0.5 * lo.abs().max(1.0);
        return (lo - d, hi + d);
    }
    (lo - 0.04 * span, hi + 0.04 * span)
}

/// Round tick positions covering `range`, 4 to 10 of them.
fn ticks((lo, hi): (f64, f64)) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(t: f64) -> String {
    if t.abs() < 1e-12 {
        return "0".into();
    }
    if t.abs() >= 1e4 || t.abs() < 1e-3 {
        return format!("{t:.1e}");
    }
    let s = format!("{t:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
