//! Minimal deterministic SVG output: field heatmaps, boundary colourings,
//! polygons and line plots.

use std::fmt::Write;

use crate::geometry::Vec2;
use crate::mesh::Mesh;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 50.0;

/// Linear blue-to-red map of `t ∈ [0, 1]`.
pub fn colour(t: f64) -> String {
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.5
    };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(49.0, 215.0),
        lerp(54.0, 48.0),
        lerp(149.0, 39.0)
    )
}

struct Frame {
    min: Vec2,
    scale: f64,
    height: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = Vec2>) -> Frame {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min = min.inf(&p);
            max = max.sup(&p);
        }
        let span = (max - min).max().max(f64::MIN_POSITIVE);
        let scale = SIZE / span;
        Frame {
            min,
            scale,
            height: (max.y - min.y) * scale,
        }
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        (
            10.0 + (p.x - self.min.x) * self.scale,
            10.0 + self.height - (p.y - self.min.y) * self.scale,
        )
    }

    fn header(&self, out: &mut String) {
        let w = SIZE + 20.0;
        let h = self.height + 20.0;
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.1} {h:.1}\">"
        );
    }
}

fn range(values: &[f64]) -> (f64, f64) {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi > lo {
        (lo, hi)
    } else {
        (lo.min(0.0), lo.max(0.0) + 1.0)
    }
}

fn boundary_paths(mesh: &Mesh, out: &mut String, frame: &Frame, stroke: &str) {
    for e in &mesh.boundary_edges {
        let (x1, y1) = frame.map(mesh.vertices[e.a]);
        let (x2, y2) = frame.map(mesh.vertices[e.b]);
        let _ = writeln!(
            out,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{stroke}\" stroke-width=\"1.5\"/>"
        );
    }
}

/// Triangles filled by the mean of their vertex values.
pub fn heatmap_svg(mesh: &Mesh, values: &[f64]) -> String {
    let frame = Frame::fit(mesh.vertices.iter().copied());
    let (lo, hi) = range(values);
    let mut out = String::new();
    frame.header(&mut out);
    for tri in &mesh.triangles {
        let v = (values[tri[0]] + values[tri[1]] + values[tri[2]]) / 3.0;
        let pts: Vec<String> = tri
            .iter()
            .map(|&i| {
                let (x, y) = frame.map(mesh.vertices[i]);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let c = colour((v - lo) / (hi - lo));
        let _ = writeln!(
            out,
            "<polygon points=\"{}\" fill=\"{c}\" stroke=\"{c}\" stroke-width=\"0.3\"/>",
            pts.join(" ")
        );
    }
    boundary_paths(mesh, &mut out, &frame, "black");
    out.push_str("</svg>\n");
    out
}

/// Boundary edges coloured by per-edge values.
pub fn boundary_svg(mesh: &Mesh, edge_values: &[f64]) -> String {
    let frame = Frame::fit(mesh.vertices.iter().copied());
    let (lo, hi) = range(edge_values);
    let mut out = String::new();
    frame.header(&mut out);
    for (e, v) in mesh.boundary_edges.iter().zip(edge_values) {
        let (x1, y1) = frame.map(mesh.vertices[e.a]);
        let (x2, y2) = frame.map(mesh.vertices[e.b]);
        let _ = writeln!(
            out,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{}\" stroke-width=\"4\"/>",
            colour((v - lo) / (hi - lo))
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Closed polygon outline.
pub fn polygon_svg(vertices: &[Vec2]) -> String {
    let frame = Frame::fit(vertices.iter().copied());
    let mut out = String::new();
    frame.header(&mut out);
    let pts: Vec<String> = vertices
        .iter()
        .map(|p| {
            let (x, y) = frame.map(*p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        "<polygon points=\"{}\" fill=\"#dde4f0\" stroke=\"black\" stroke-width=\"1.5\"/>",
        pts.join(" ")
    );
    out.push_str("</svg>\n");
    out
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Scatter/line plot with optional horizontal reference lines.
pub fn line_plot_svg(
    title: &str,
    x_label: &str,
    series: &[Series],
    reference_lines: &[(String, f64)],
) -> String {
    let all_y = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .chain(reference_lines.iter().map(|r| r.1))
        .filter(|v| v.is_finite());
    let all_x = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .filter(|v| v.is_finite());
    let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for y in all_y {
        ylo = ylo.min(y);
        yhi = yhi.max(y);
    }
    let (mut xlo, mut xhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in all_x {
        xlo = xlo.min(x);
        xhi = xhi.max(x);
    }
    if !(yhi > ylo) {
        ylo -= 0.5;
        yhi += 0.5;
    }
    if !(xhi > xlo) {
        xlo -= 0.5;
        xhi += 0.5;
    }
    let pad = 0.05 * (yhi - ylo);
    let (ylo, yhi) = (ylo - pad, yhi + pad);
    let width = SIZE + 2.0 * MARGIN;
    let height = 0.75 * SIZE + 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - xlo) / (xhi - xlo) * SIZE;
    let sy = |y: f64| height - MARGIN - (y - ylo) / (yhi - ylo) * 0.75 * SIZE;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"20\">{}</text>",
        MARGIN,
        escape(title)
    );
    let _ = writeln!(
        out,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{SIZE}\" height=\"{:.1}\" fill=\"none\" stroke=\"black\"/>",
        0.75 * SIZE
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
        MARGIN + SIZE / 2.0,
        height - 10.0,
        escape(x_label)
    );
    for (y, anchor) in [(ylo, "start"), (yhi, "start")] {
        let _ = writeln!(
            out,
            "<text x=\"2\" y=\"{:.1}\" text-anchor=\"{anchor}\">{y:.4}</text>",
            sy(y)
        );
    }
    for (label, y) in reference_lines {
        let _ = writeln!(
            out,
            "<line x1=\"{MARGIN}\" y1=\"{0:.2}\" x2=\"{1:.2}\" y2=\"{0:.2}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>",
            sy(*y),
            MARGIN + SIZE
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"gray\">{}</text>",
            MARGIN + 4.0,
            sy(*y) - 3.0,
            escape(label)
        );
    }
    for (k, s) in series.iter().enumerate() {
        let c = colour(if series.len() > 1 {
            k as f64 / (series.len() - 1) as f64
        } else {
            0.0
        });
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{c}\" stroke-width=\"1.5\"/>",
            pts.join(" ")
        );
        for p in &pts {
            let (x, y) = p.split_once(',').unwrap();
            let _ = writeln!(out, "<circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"{c}\"/>");
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{c}\">{}</text>",
            MARGIN + SIZE - 120.0,
            MARGIN + 16.0 * (k as f64 + 1.0),
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
