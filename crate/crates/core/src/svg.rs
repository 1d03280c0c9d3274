//! Static SVG charts: labeled scatter plots, line charts with error bars,
//! and heat maps. Output depends only on the input values.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::embed::Embedding;
use crate::error::{invalid_config, Result};
use crate::io::write_text;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Azimuth and elevation of the fixed 3-D viewing direction, in radians.
const VIEW_AZIMUTH: f64 = 0.6;
const VIEW_ELEVATION: f64 = 0.35;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title)).unwrap();
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for v in it {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo <= 0.0 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        writeln!(out, r#"<g class="axes" stroke="black" stroke-width="1">"#).unwrap();
        writeln!(out, r#"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}"/>"#).unwrap();
        writeln!(out, r#"<line x1="{l}" y1="{b}" x2="{l}" y2="{t}"/>"#).unwrap();
        out.push_str("</g>\n");
        for (v, anchor) in [(self.x0, "start"), (self.x1, "end")] {
            writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}">{v:.3}</text>"#, self.px(v), b + 16.0).unwrap();
        }
        for v in [self.y0, self.y1] {
            writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#, l - 4.0, self.py(v) + 4.0).unwrap();
        }
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, b + 36.0, escape(x_label))
            .unwrap();
        writeln!(
            out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (t + b) / 2.0,
            (t + b) / 2.0,
            escape(y_label)
        )
        .unwrap();
    }
}

fn legend(out: &mut String, names: &[String]) {
    let x = WIDTH - RIGHT + 16.0;
    writeln!(out, r#"<g class="legend">"#).unwrap();
    for (k, name) in names.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * k as f64;
        let color = PALETTE[k % PALETTE.len()];
        writeln!(out, r#"<rect x="{x}" y="{:.1}" width="10" height="10" fill="{color}"/>"#, y - 9.0).unwrap();
        writeln!(out, r#"<text x="{:.1}" y="{y:.1}">{}</text>"#, x + 16.0, escape(name)).unwrap();
    }
    out.push_str("</g>\n");
}

/// Projects 3-D points onto a fixed viewing plane.
pub fn orthographic(coords: &DMatrix<f64>) -> DMatrix<f64> {
    let (ca, sa) = (VIEW_AZIMUTH.cos(), VIEW_AZIMUTH.sin());
    let (ce, se) = (VIEW_ELEVATION.cos(), VIEW_ELEVATION.sin());
    DMatrix::from_fn(coords.nrows(), 2, |i, c| {
        let (x, y, z) = (coords[(i, 0)], coords[(i, 1)], coords[(i, 2)]);
        let u = ca * x - sa * y;
        let depth_y = sa * x + ca * y;
        if c == 0 {
            u
        } else {
            ce * z - se * depth_y
        }
    })
}

/// One circle per row, colored by label. Accepts 2 or 3 columns.
pub fn scatter_svg(coords: &DMatrix<f64>, labels: Option<&[String]>, title: &str) -> Result<String> {
    let r = coords.ncols();
    if !(2..=3).contains(&r) {
        return Err(invalid_config(format!("scatter plots need 2 or 3 coordinates, got {r}")));
    }
    if let Some(l) = labels {
        if l.len() != coords.nrows() {
            return Err(invalid_config("label count does not match the number of points"));
        }
    }
    let flat = if r == 3 { orthographic(coords) } else { coords.clone() };
    let groups: Vec<String> = match labels {
        Some(l) => l.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
        None => vec!["points".to_string()],
    };
    let frame = Frame::new(flat.column(0).iter().copied(), flat.column(1).iter().copied());
    let mut out = String::new();
    header(&mut out, title);
    let (xl, yl) = if r == 3 { ("view 1", "view 2") } else { ("y1", "y2") };
    frame.axes(&mut out, xl, yl);
    writeln!(out, r#"<g class="points" fill-opacity="0.8">"#).unwrap();
    for i in 0..flat.nrows() {
        let k = labels.map_or(0, |l| groups.binary_search(&l[i]).unwrap());
        writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
            frame.px(flat[(i, 0)]),
            frame.py(flat[(i, 1)]),
            PALETTE[k % PALETTE.len()]
        )
        .unwrap();
    }
    out.push_str("</g>\n");
    legend(&mut out, &groups);
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_scatter_svg(e: &Embedding, labels: Option<&[String]>, path: &Path) -> Result<()> {
    write_text(path, &scatter_svg(&e.coords, labels, "embedding")?)
}

/// A named series of `(x, mean, std)` points.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64, f64)>,
}

/// Polylines with ±std error bars.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let pts = || series.iter().flat_map(|s| s.points.iter());
    let xs = pts().map(|p| p.0);
    let ys = pts().flat_map(|p| [p.1 - p.2, p.1 + p.2]);
    let frame = Frame::new(xs, ys);
    let mut out = String::new();
    header(&mut out, title);
    frame.axes(&mut out, x_label, y_label);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> =
            s.points.iter().map(|p| format!("{:.2},{:.2}", frame.px(p.0), frame.py(p.1))).collect();
        writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" ")).unwrap();
        for p in &s.points {
            let x = frame.px(p.0);
            writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                frame.py(p.1 - p.2),
                frame.py(p.1 + p.2)
            )
            .unwrap();
        }
    }
    let names: Vec<String> = series.iter().map(|s| s.name.clone()).collect();
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}

/// Grid of cells shaded from white (0) to dark blue (1), values printed.
pub fn heatmap_svg(title: &str, ticks: &[String], m: &DMatrix<f64>) -> String {
    let n = m.nrows().max(1);
    let size = (HEIGHT - TOP - BOTTOM).min(WIDTH - LEFT - RIGHT) / n as f64;
    let mut out = String::new();
    header(&mut out, title);
    for a in 0..m.nrows() {
        for b in 0..m.ncols() {
            let v = m[(a, b)].clamp(0.0, 1.0);
            let shade = |lo: f64, hi: f64| (hi + (lo - hi) * v).round() as u8;
            let (x, y) = (LEFT + size * b as f64, TOP + size * a as f64);
            writeln!(
                out,
                r##"<rect x="{x:.2}" y="{y:.2}" width="{size:.2}" height="{size:.2}" fill="#{:02x}{:02x}{:02x}" stroke="white"/>"##,
                shade(8.0, 255.0),
                shade(48.0, 255.0),
                shade(107.0, 255.0)
            )
            .unwrap();
            let ink = if v > 0.5 { "white" } else { "black" };
            writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="{ink}" font-size="10">{:.2}</text>"#,
                x + size / 2.0,
                y + size / 2.0 + 4.0,
                m[(a, b)]
            )
            .unwrap();
        }
    }
    for (k, t) in ticks.iter().enumerate() {
        let c = size * (k as f64 + 0.5);
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + c, TOP + size * n as f64 + 16.0, escape(t))
            .unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 4.0, TOP + c + 4.0, escape(t)).unwrap();
    }
    out.push_str("</svg>\n");
    out
}
