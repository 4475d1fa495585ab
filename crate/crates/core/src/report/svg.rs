//! Minimal SVG line charts: linear or log axes, one `<polyline>` per series,
//! vertical marker lines and an optional inset panel.

use std::fmt::Write;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub log: bool,
    pub label: String,
}

impl Axis {
    pub fn linear(lo: f64, hi: f64, label: impl Into<String>) -> Self {
        Self {
            lo,
            hi,
            log: false,
            label: label.into(),
        }
    }

    pub fn log(lo: f64, hi: f64, label: impl Into<String>) -> Self {
        Self {
            lo,
            hi,
            log: true,
            label: label.into(),
        }
    }

    /// Axis covering `values` with a small relative pad.
    pub fn fit<'a>(values: impl IntoIterator<Item = &'a f64>, log: bool, label: &str) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            if v.is_finite() && (!log || *v > 0.0) {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = if log { (0.1, 10.0) } else { (0.0, 1.0) };
        }
        if log {
            let pad = (hi / lo).powf(0.03).max(1.01);
            Self::log(lo / pad, hi * pad, label)
        } else {
            let pad = if hi > lo {
                0.03 * (hi - lo)
            } else {
                0.5 * lo.abs().max(1.0)
            };
            Self::linear(lo - pad, hi + pad, label)
        }
    }

    fn t(&self, v: f64) -> f64 {
        if self.log {
            (v.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            log_ticks(self.lo, self.hi)
        } else {
            linear_ticks(self.lo, self.hi)
        }
    }
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if span.is_nan() || span <= 0.0 {
        return vec![lo];
    }
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn log_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = (lo.log10().floor() as i32, hi.log10().ceil() as i32);
    let mults: &[f64] = if b - a <= 1 { &[1.0, 2.0, 5.0] } else { &[1.0] };
    let mut out = Vec::new();
    for e in a..=b {
        for m in mults {
            let v = m * 10f64.powi(e);
            if v >= lo && v <= hi {
                out.push(v);
            }
        }
    }
    if out.len() < 2 {
        out = linear_ticks(lo, hi);
    }
    out
}

fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.0e}");
    }
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub stroke: String,
    pub width: f64,
    pub opacity: f64,
    /// Shown in the legend.
    pub legend: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>, stroke: &str) -> Self {
        Self {
            name: name.into(),
            points,
            stroke: stroke.into(),
            width: 1.5,
            opacity: 1.0,
            legend: true,
        }
    }

    pub fn width(mut self, w: f64) -> Self {
        self.width = w;
        self
    }

    pub fn faint(mut self, opacity: f64) -> Self {
        self.opacity = opacity;
        self.legend = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub name: String,
    pub x: f64,
    pub stroke: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x: Axis,
    pub y: Axis,
    pub series: Vec<Series>,
    pub markers: Vec<Marker>,
}

impl Plot {
    pub fn new(title: impl Into<String>, x: Axis, y: Axis) -> Self {
        Self {
            title: title.into(),
            x,
            y,
            series: Vec::new(),
            markers: Vec::new(),
        }
    }
}

struct Frame {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn px(&self, axis: &Axis, v: f64) -> f64 {
        self.x + axis.t(v).clamp(-0.05, 1.05) * self.w
    }

    fn py(&self, axis: &Axis, v: f64) -> f64 {
        self.y + self.h - axis.t(v).clamp(-0.05, 1.05) * self.h
    }
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

fn panel(out: &mut String, plot: &Plot, f: &Frame, small: bool) {
    let clip = if small { "clip-inset" } else { "clip-main" };
    let _ = writeln!(
        out,
        r#"<defs><clipPath id="{clip}"><rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}"/></clipPath></defs>"#,
        f.x, f.y, f.w, f.h
    );
    let _ = writeln!(
        out,
        r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="white" stroke="black"/>"#,
        f.x, f.y, f.w, f.h
    );
    let fs = if small { 9 } else { 12 };
    for t in plot.x.ticks() {
        let x = f.px(&plot.x, t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="{fs}">{}</text>"#,
            f.y + f.h,
            f.y + f.h + 4.0,
            f.y + f.h + 6.0 + fs as f64,
            label(t)
        );
    }
    for t in plot.y.ticks() {
        let y = f.py(&plot.y, t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="{fs}">{}</text>"#,
            f.x - 4.0,
            f.x,
            f.x - 6.0,
            y + fs as f64 / 3.0,
            label(t)
        );
    }
    if !small {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            f.x + f.w / 2.0,
            f.y + f.h + 40.0,
            escape(&plot.x.label)
        );
        let _ = writeln!(
            out,
            r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">{}</text>"#,
            f.y + f.h / 2.0,
            f.y + f.h / 2.0,
            escape(&plot.y.label)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#,
            f.x + f.w / 2.0,
            f.y - 15.0,
            escape(&plot.title)
        );
    }
    let _ = writeln!(out, r#"<g clip-path="url(#{clip})">"#);
    for s in &plot.series {
        let _ = write!(
            out,
            r#"<polyline class="series" data-name="{}" fill="none" stroke="{}" stroke-width="{}" stroke-opacity="{}" points=""#,
            escape(&s.name),
            s.stroke,
            s.width,
            s.opacity
        );
        let mut first = true;
        for (x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) || (plot.y.log && *y <= 0.0) {
                continue;
            }
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{:.1},{:.1}", f.px(&plot.x, *x), f.py(&plot.y, *y));
        }
        out.push_str("\"/>\n");
    }
    for m in &plot.markers {
        let x = f.px(&plot.x, m.x);
        let _ = writeln!(
            out,
            r#"<line class="marker" data-name="{}" x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="{}" stroke-width="3"/>"#,
            escape(&m.name),
            f.y,
            f.y + f.h,
            m.stroke
        );
    }
    out.push_str("</g>\n");
    if !small {
        legend(out, plot, f);
    }
}

fn legend(out: &mut String, plot: &Plot, f: &Frame) {
    let entries: Vec<(&str, &str)> = plot
        .series
        .iter()
        .filter(|s| s.legend)
        .map(|s| (s.name.as_str(), s.stroke.as_str()))
        .chain(
            plot.markers
                .iter()
                .map(|m| (m.name.as_str(), m.stroke.as_str())),
        )
        .collect();
    for (i, (name, stroke)) in entries.iter().enumerate() {
        let y = f.y + 15.0 + 16.0 * i as f64;
        let x = f.x + 10.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{stroke}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            x + 20.0,
            x + 25.0,
            y + 4.0,
            escape(name)
        );
    }
}

/// Render `plot`, optionally with `inset` drawn in the upper right.
pub fn render(plot: &Plot, inset: Option<&Plot>) -> String {
    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT);
    let main = Frame {
        x: MARGIN_LEFT,
        y: MARGIN_TOP,
        w: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        h: HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
    };
    panel(&mut out, plot, &main, false);
    if let Some(ins) = inset {
        let f = Frame {
            x: main.x + main.w * 0.55,
            y: main.y + 20.0,
            w: main.w * 0.4,
            h: main.h * 0.4,
        };
        panel(&mut out, ins, &f, true);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#,
            f.x + f.w / 2.0,
            f.y - 5.0,
            escape(&ins.title)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Horizontal bar with one cell per period: black for 1, white for 0.
pub fn render_bits(title: &str, bits: &[u8], first: &str, last: &str) -> String {
    let (w, h) = (WIDTH, 140.0);
    let mut out = String::new();
    header(&mut out, w, h);
    let (x0, y0, bw, bh) = (MARGIN_LEFT, 40.0, w - MARGIN_LEFT - MARGIN_RIGHT, 50.0);
    let cell = bw / bits.len().max(1) as f64;
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="25" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    for (i, b) in bits.iter().enumerate() {
        if *b == 1 {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{y0}" width="{:.2}" height="{bh}" fill="black"/>"#,
                x0 + i as f64 * cell,
                cell
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y0}" width="{bw}" height="{bh}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{x0}" y="{:.1}">{}</text><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
        y0 + bh + 20.0,
        escape(first),
        x0 + bw,
        y0 + bh + 20.0,
        escape(last)
    );
    out.push_str("</svg>\n");
    out
}
