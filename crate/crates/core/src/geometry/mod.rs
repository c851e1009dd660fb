//! Plane domains bounded by closed polylines.
//!
//! A [`Domain`] is a list of simple, pairwise disjoint boundary loops. Outer
//! loops run counter-clockwise, hole loops clockwise, so the domain always lies
//! to the left of the boundary. Loops that approximate a circle or an ellipse
//! keep the exact curve as metadata: curvature is read from it and refined
//! meshes snap new boundary vertices onto it.

mod convex;

pub use convex::{convex_hull, convex_project, is_convex_polygon, minimal_width, polygon_centroid};

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// Smallest admissible hole radius for perforated domains.
pub const DEFAULT_MIN_FEATURE: f64 = 1e-3;

/// Minimum number of segments used for any polygonalized circle.
pub const MIN_CURVE_SEGMENTS: usize = 12;

/// Exact description of the curve a loop approximates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curve {
    /// Straight segments between the stored vertices.
    Segments,
    Circle {
        center: Vec2,
        radius: f64,
    },
    /// Ellipse `center + R(angle) (a cos t, b sin t)`.
    Ellipse {
        center: Vec2,
        a: f64,
        b: f64,
        angle: f64,
    },
}

impl Curve {
    pub fn is_analytic(&self) -> bool {
        !matches!(self, Curve::Segments)
    }

    /// Pushes `p` onto the curve (radially in the curve's own parametrization).
    /// Returns `p` unchanged for straight segments.
    pub fn snap(&self, p: Vec2) -> Vec2 {
        match *self {
            Curve::Segments => p,
            Curve::Circle { center, radius } => {
                let d = p - center;
                let n = d.norm();
                if n == 0.0 {
                    p
                } else {
                    center + d * (radius / n)
                }
            }
            Curve::Ellipse {
                center,
                a,
                b,
                angle,
            } => {
                let t = self.parameter_of(p);
                let (s, c) = angle.sin_cos();
                let local = Vec2::new(a * t.cos(), b * t.sin());
                center + Vec2::new(c * local.x - s * local.y, s * local.x + c * local.y)
            }
        }
    }

    fn parameter_of(&self, p: Vec2) -> f64 {
        match *self {
            Curve::Ellipse {
                center,
                a,
                b,
                angle,
            } => {
                let d = p - center;
                let (s, c) = angle.sin_cos();
                let x = c * d.x + s * d.y;
                let y = -s * d.x + c * d.y;
                (y / b).atan2(x / a)
            }
            Curve::Circle { center, .. } => {
                let d = p - center;
                d.y.atan2(d.x)
            }
            Curve::Segments => 0.0,
        }
    }

    /// Unsigned curvature of the curve at the point nearest `p`.
    pub fn curvature_at(&self, p: Vec2) -> Option<f64> {
        match *self {
            Curve::Segments => None,
            Curve::Circle { radius, .. } => Some(1.0 / radius),
            Curve::Ellipse { a, b, .. } => {
                let t = self.parameter_of(p);
                let (s, c) = t.sin_cos();
                Some(a * b / (a * a * s * s + b * b * c * c).powf(1.5))
            }
        }
    }

    /// Unsigned curvature extrema over the whole curve.
    pub fn curvature_range(&self) -> Option<(f64, f64)> {
        match *self {
            Curve::Segments => None,
            Curve::Circle { radius, .. } => Some((1.0 / radius, 1.0 / radius)),
            Curve::Ellipse { a, b, .. } => {
                let (big, small) = if a >= b { (a, b) } else { (b, a) };
                Some((small / (big * big), big / (small * small)))
            }
        }
    }

    fn transformed(&self, m: &Matrix2<f64>, t: &Vec2) -> Curve {
        match *self {
            Curve::Segments => Curve::Segments,
            Curve::Circle { center, radius } => {
                let c = m * center + t;
                ellipse_image(m, c, radius, radius, 0.0)
            }
            Curve::Ellipse {
                center,
                a,
                b,
                angle,
            } => ellipse_image(m, m * center + t, a, b, angle),
        }
    }
}

fn ellipse_image(m: &Matrix2<f64>, center: Vec2, a: f64, b: f64, angle: f64) -> Curve {
    let rot = Matrix2::new(angle.cos(), -angle.sin(), angle.sin(), angle.cos());
    let shape = m * rot * Matrix2::new(a, 0.0, 0.0, b);
    let svd = shape.svd(true, false);
    let u = svd.u.expect("svd u");
    let (s0, s1) = (svd.singular_values[0], svd.singular_values[1]);
    if (s0 - s1).abs() <= 1e-14 * s0.max(s1) {
        return Curve::Circle {
            center,
            radius: 0.5 * (s0 + s1),
        };
    }
    Curve::Ellipse {
        center,
        a: s0,
        b: s1,
        angle: u[(1, 0)].atan2(u[(0, 0)]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopKind {
    Outer,
    Hole,
}

/// One closed boundary polyline. The closing segment (last → first) is implicit.
#[derive(Debug, Clone)]
pub struct BoundaryLoop {
    pub points: Vec<Vec2>,
    pub kind: LoopKind,
    pub curve: Curve,
}

impl BoundaryLoop {
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn segments(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    /// Distance from `p` to the polyline.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.segments()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn signed_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    let mut s = 0.0;
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        s += p.x * q.y - q.x * p.y;
    }
    0.5 * s
}

pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    };
    (a + ab * t - p).norm()
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Radius and derived constants of a periodic perforation with holes of radius
/// `exp(-c0 / epsilon^2)` on a lattice of period `2 epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerforationParams {
    pub epsilon: f64,
    pub c0: f64,
    pub r_eps: f64,
    pub a: f64,
    pub hole_segments: usize,
    pub min_feature: f64,
}

impl PerforationParams {
    pub fn new(epsilon: f64, c0: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !(c0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "perforation needs epsilon > 0 and C0 > 0 (got {epsilon}, {c0})"
            )));
        }
        let r_eps = (-c0 / (epsilon * epsilon)).exp();
        Ok(Self {
            epsilon,
            c0,
            r_eps,
            a: PI / (2.0 * c0),
            hole_segments: MIN_CURVE_SEGMENTS,
            min_feature: DEFAULT_MIN_FEATURE,
        })
    }

    pub fn with_hole_segments(mut self, n: usize) -> Self {
        self.hole_segments = n.max(MIN_CURVE_SEGMENTS);
        self
    }

    pub fn with_min_feature(mut self, min_feature: f64) -> Self {
        self.min_feature = min_feature;
        self
    }
}

/// Declarative description of a domain, as read from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
    Disk {
        center: [f64; 2],
        radius: f64,
        n_segments: usize,
    },
    Ellipse {
        a: f64,
        b: f64,
        n_segments: usize,
    },
    /// Side `side`, centroid at the origin, horizontal base.
    EquilateralTriangle {
        side: f64,
    },
    /// `(-n, n) x (0, 1)`.
    Rectangle {
        n: f64,
    },
    /// Unit disk plus `n` disjoint disks of radius `n^(-1/4)`.
    BallCluster {
        n: usize,
        n_segments: usize,
        max_extent: f64,
    },
    Perforated {
        base: Box<DomainSpec>,
        params: PerforationParams,
    },
}

impl DomainSpec {
    pub fn unit_square() -> Self {
        Self::axis_box(0.0, 0.0, 1.0, 1.0)
    }

    pub fn axis_box(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        DomainSpec::Polygon {
            vertices: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
        }
    }

    pub fn unit_disk(n_segments: usize) -> Self {
        DomainSpec::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
            n_segments,
        }
    }

    pub fn ball_cluster(n: usize) -> Self {
        DomainSpec::BallCluster {
            n,
            n_segments: 64,
            max_extent: 40.0,
        }
    }

    pub fn build(&self) -> Result<Domain> {
        build_domain(self)
    }
}

/// Validated plane domain.
#[derive(Debug, Clone)]
pub struct Domain {
    loops: Vec<BoundaryLoop>,
    pub label: String,
}

impl Domain {
    /// Builds a domain from loops, fixing orientation by kind and checking that
    /// loops are simple, disjoint and that holes sit inside an outer loop.
    pub fn new(mut loops: Vec<BoundaryLoop>, label: impl Into<String>) -> Result<Self> {
        if loops.is_empty() {
            return Err(Error::InvalidDomain("no boundary loops".into()));
        }
        for (i, lp) in loops.iter().enumerate() {
            if lp.points.len() < 3 {
                return Err(Error::InvalidDomain(format!(
                    "loop {i} has fewer than 3 vertices"
                )));
            }
        }
        check_simple(&loops)?;
        for (i, lp) in loops.iter_mut().enumerate() {
            let area = lp.signed_area();
            if !(area.abs() > 0.0) || !area.is_finite() {
                return Err(Error::Degenerate(format!("loop {i} has zero area")));
            }
            let want_positive = lp.kind == LoopKind::Outer;
            if (area > 0.0) != want_positive {
                lp.points.reverse();
            }
        }
        let outers: Vec<&BoundaryLoop> =
            loops.iter().filter(|l| l.kind == LoopKind::Outer).collect();
        if outers.is_empty() {
            return Err(Error::InvalidDomain("no outer loop".into()));
        }
        for (i, lp) in loops.iter().enumerate() {
            let p = lp.points[0];
            let containing = loops
                .iter()
                .enumerate()
                .filter(|(j, o)| *j != i && o.kind == LoopKind::Outer)
                .filter(|(_, o)| point_in_polygon(p, &o.points))
                .count();
            match lp.kind {
                LoopKind::Hole if containing == 0 => {
                    return Err(Error::InvalidDomain(format!(
                        "hole loop {i} is not inside an outer loop"
                    )))
                }
                LoopKind::Outer if containing > 0 => {
                    return Err(Error::InvalidDomain(format!(
                        "outer loop {i} is nested inside another outer loop"
                    )))
                }
                _ => {}
            }
        }
        Ok(Self {
            loops,
            label: label.into(),
        })
    }

    pub fn loops(&self) -> &[BoundaryLoop] {
        &self.loops
    }

    pub fn outer_loops(&self) -> impl Iterator<Item = &BoundaryLoop> {
        self.loops.iter().filter(|l| l.kind == LoopKind::Outer)
    }

    pub fn hole_count(&self) -> usize {
        self.loops
            .iter()
            .filter(|l| l.kind == LoopKind::Hole)
            .count()
    }

    pub fn area(&self) -> f64 {
        self.loops.iter().map(|l| l.signed_area()).sum()
    }

    pub fn perimeter(&self) -> f64 {
        self.loops.iter().map(|l| l.length()).sum()
    }

    /// Convex means a single outer loop without holes and no reflex turn.
    pub fn is_convex(&self) -> bool {
        self.loops.len() == 1 && is_convex_polygon(&self.loops[0].points)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let mut inside = false;
        for lp in &self.loops {
            if point_in_polygon(p, &lp.points) {
                inside = !inside;
            }
        }
        inside
    }

    /// Distance from `p` to the nearest boundary loop.
    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        self.loops
            .iter()
            .map(|l| l.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Image under `x -> m x + t`. Circles and ellipses stay analytic.
    pub fn transformed(&self, m: Matrix2<f64>, t: Vec2) -> Result<Domain> {
        let loops = self
            .loops
            .iter()
            .map(|l| BoundaryLoop {
                points: l.points.iter().map(|p| m * p + t).collect(),
                kind: l.kind,
                curve: l.curve.transformed(&m, &t),
            })
            .collect();
        Domain::new(loops, self.label.clone())
    }

    pub fn scaled(&self, s: f64) -> Result<Domain> {
        self.transformed(Matrix2::identity() * s, Vec2::zeros())
    }

    pub fn rotated(&self, angle: f64) -> Result<Domain> {
        let (s, c) = angle.sin_cos();
        self.transformed(Matrix2::new(c, -s, s, c), Vec2::zeros())
    }

    pub fn translated(&self, t: Vec2) -> Result<Domain> {
        self.transformed(Matrix2::identity(), t)
    }

    /// Every boundary vertex, loop by loop.
    pub fn vertices(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.loops.iter().flat_map(|l| l.points.iter().copied())
    }
}

fn check_simple(loops: &[BoundaryLoop]) -> Result<()> {
    struct Seg {
        a: Vec2,
        b: Vec2,
        loop_id: usize,
        index: usize,
        len: usize,
        xmin: f64,
        xmax: f64,
    }
    let mut segs = Vec::new();
    for (li, lp) in loops.iter().enumerate() {
        let n = lp.points.len();
        for (i, (a, b)) in lp.segments().enumerate() {
            if (b - a).norm() == 0.0 {
                return Err(Error::Degenerate(format!(
                    "loop {li} has a repeated vertex at index {i}"
                )));
            }
            segs.push(Seg {
                a,
                b,
                loop_id: li,
                index: i,
                len: n,
                xmin: a.x.min(b.x),
                xmax: a.x.max(b.x),
            });
        }
    }
    segs.sort_by(|s, t| s.xmin.total_cmp(&t.xmin));
    for i in 0..segs.len() {
        let s = &segs[i];
        for t in segs[i + 1..].iter() {
            if t.xmin > s.xmax {
                break;
            }
            if s.loop_id == t.loop_id {
                let d = (s.index as isize - t.index as isize).unsigned_abs();
                if d == 1 || d == s.len - 1 {
                    // adjacent segments share an endpoint; reject only folds
                    if segments_overlap_collinear(s.a, s.b, t.a, t.b) {
                        return Err(Error::SelfIntersecting {
                            loop_a: s.loop_id,
                            loop_b: t.loop_id,
                        });
                    }
                    continue;
                }
            }
            if segments_intersect(s.a, s.b, t.a, t.b) {
                return Err(Error::SelfIntersecting {
                    loop_a: s.loop_id.min(t.loop_id),
                    loop_b: s.loop_id.max(t.loop_id),
                });
            }
        }
    }
    Ok(())
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    cross(b - a, c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    if a.y.max(b.y) < c.y.min(d.y) || c.y.max(d.y) < a.y.min(b.y) {
        return false;
    }
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

fn segments_overlap_collinear(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    if orient(a, b, c) != 0.0 || orient(a, b, d) != 0.0 {
        return false;
    }
    // collinear adjacent segments fold back when they point in opposite directions
    (b - a).dot(&(d - c)) < 0.0
}

fn circle_points(center: Vec2, radius: f64, n: usize) -> Vec<Vec2> {
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            center + Vec2::new(radius * t.cos(), radius * t.sin())
        })
        .collect()
}

fn ellipse_points(a: f64, b: f64, n: usize) -> Vec<Vec2> {
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            Vec2::new(a * t.cos(), b * t.sin())
        })
        .collect()
}

/// Builds the domain described by `spec`.
pub fn build_domain(spec: &DomainSpec) -> Result<Domain> {
    match spec {
        DomainSpec::Polygon { vertices } => {
            let points = vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect();
            Domain::new(
                vec![BoundaryLoop {
                    points,
                    kind: LoopKind::Outer,
                    curve: Curve::Segments,
                }],
                "polygon",
            )
        }
        DomainSpec::Disk {
            center,
            radius,
            n_segments,
        } => {
            check_segments(*n_segments)?;
            if !(*radius > 0.0) {
                return Err(Error::InvalidParameter(format!("disk radius {radius}")));
            }
            let c = Vec2::new(center[0], center[1]);
            Domain::new(
                vec![BoundaryLoop {
                    points: circle_points(c, *radius, *n_segments),
                    kind: LoopKind::Outer,
                    curve: Curve::Circle {
                        center: c,
                        radius: *radius,
                    },
                }],
                "disk",
            )
        }
        DomainSpec::Ellipse { a, b, n_segments } => {
            check_segments(*n_segments)?;
            if !(*a > 0.0 && *b > 0.0) {
                return Err(Error::InvalidParameter(format!("ellipse axes {a}, {b}")));
            }
            let curve = if a == b {
                Curve::Circle {
                    center: Vec2::zeros(),
                    radius: *a,
                }
            } else {
                Curve::Ellipse {
                    center: Vec2::zeros(),
                    a: *a,
                    b: *b,
                    angle: 0.0,
                }
            };
            Domain::new(
                vec![BoundaryLoop {
                    points: ellipse_points(*a, *b, *n_segments),
                    kind: LoopKind::Outer,
                    curve,
                }],
                "ellipse",
            )
        }
        DomainSpec::EquilateralTriangle { side } => {
            let s = *side;
            if !(s > 0.0) {
                return Err(Error::InvalidParameter(format!("triangle side {s}")));
            }
            let r3 = 3f64.sqrt();
            let points = vec![
                Vec2::new(-s / 2.0, -s / (2.0 * r3)),
                Vec2::new(s / 2.0, -s / (2.0 * r3)),
                Vec2::new(0.0, s / r3),
            ];
            Domain::new(
                vec![BoundaryLoop {
                    points,
                    kind: LoopKind::Outer,
                    curve: Curve::Segments,
                }],
                "equilateral_triangle",
            )
        }
        DomainSpec::Rectangle { n } => {
            if !(*n > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "rectangle half-length {n}"
                )));
            }
            let mut d = build_domain(&DomainSpec::axis_box(-n, 0.0, *n, 1.0))?;
            d.label = "rectangle".into();
            Ok(d)
        }
        DomainSpec::BallCluster {
            n,
            n_segments,
            max_extent,
        } => build_cluster(*n, *n_segments, *max_extent),
        DomainSpec::Perforated { base, params } => build_perforated(base, params),
    }
}

fn check_segments(n: usize) -> Result<()> {
    if n < MIN_CURVE_SEGMENTS {
        return Err(Error::InvalidParameter(format!(
            "curved loops need at least {MIN_CURVE_SEGMENTS} segments (got {n})"
        )));
    }
    Ok(())
}

/// Radius of the small disks in a cluster of `n` disks.
pub fn cluster_radius(n: usize) -> f64 {
    (n as f64).powf(-0.25)
}

fn build_cluster(n: usize, n_segments: usize, max_extent: f64) -> Result<Domain> {
    check_segments(n_segments)?;
    let mut loops = vec![BoundaryLoop {
        points: circle_points(Vec2::zeros(), 1.0, n_segments),
        kind: LoopKind::Outer,
        curve: Curve::Circle {
            center: Vec2::zeros(),
            radius: 1.0,
        },
    }];
    if n > 0 {
        let r = cluster_radius(n);
        // square grid to the right of the unit disk; gaps of 4r everywhere
        let cols = (n as f64).sqrt().ceil() as usize;
        let rows = n.div_ceil(cols);
        let pitch = 6.0 * r;
        let x_start = 1.0 + 4.0 * r + r;
        let y_start = -0.5 * (rows as f64 - 1.0) * pitch;
        let x_end = x_start + (cols as f64 - 1.0) * pitch + r;
        let y_half = -y_start + r;
        if x_end > max_extent || y_half > max_extent {
            return Err(Error::ClusterPlacement(format!(
                "{n} disks of radius {r} need extent {:.3} > {max_extent}",
                x_end.max(y_half)
            )));
        }
        let seg = n_segments.max(MIN_CURVE_SEGMENTS);
        for k in 0..n {
            let (i, j) = (k % cols, k / cols);
            let c = Vec2::new(x_start + i as f64 * pitch, y_start + j as f64 * pitch);
            loops.push(BoundaryLoop {
                points: circle_points(c, r, seg),
                kind: LoopKind::Outer,
                curve: Curve::Circle {
                    center: c,
                    radius: r,
                },
            });
        }
    }
    Domain::new(loops, format!("ball_cluster_{n}"))
}

fn build_perforated(base: &DomainSpec, params: &PerforationParams) -> Result<Domain> {
    let base = build_domain(base)?;
    let r = params.r_eps;
    if !(r < params.epsilon) {
        return Err(Error::InvalidParameter(format!(
            "hole radius {r} must be smaller than epsilon {}",
            params.epsilon
        )));
    }
    if r < params.min_feature {
        return Err(Error::FeatureTooSmall(format!(
            "hole radius exp(-C0/eps^2) = {r:e} is below the minimum feature size {:e}",
            params.min_feature
        )));
    }
    let eps = params.epsilon;
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in base.vertices() {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    // cell centres eps (2z + 1)
    let lo = |v: f64| ((v / eps - 1.0) / 2.0).floor() as i64 - 1;
    let hi = |v: f64| ((v / eps - 1.0) / 2.0).ceil() as i64 + 1;
    let mut loops: Vec<BoundaryLoop> = base.loops.clone();
    let mut holes = 0usize;
    for j in lo(ymin)..=hi(ymax) {
        for i in lo(xmin)..=hi(xmax) {
            let c = Vec2::new(eps * (2 * i + 1) as f64, eps * (2 * j + 1) as f64);
            if !base.contains(c) || base.boundary_distance(c) <= 2.0 * r {
                continue;
            }
            loops.push(BoundaryLoop {
                points: circle_points(c, r, params.hole_segments),
                kind: LoopKind::Hole,
                curve: Curve::Circle {
                    center: c,
                    radius: r,
                },
            });
            holes += 1;
        }
    }
    let mut d = Domain::new(loops, format!("perforated_{}", base.label))?;
    if holes == 0 {
        d.label.push_str("_no_holes");
    }
    Ok(d)
}

/// Measurements of a domain.
#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    pub area: f64,
    pub perimeter: f64,
    pub convex: bool,
    /// Only for convex domains.
    pub minimal_width: Option<f64>,
    pub diameter: f64,
    /// Only when every loop carries an analytic curve.
    pub k_min: Option<f64>,
    pub k_max: Option<f64>,
}

pub fn geometry_report(domain: &Domain) -> GeometryReport {
    let convex = domain.is_convex();
    let hull = convex_hull(&domain.vertices().collect::<Vec<_>>());
    let minimal_width = if convex {
        Some(minimal_width(&hull))
    } else {
        None
    };
    let mut diameter: f64 = 0.0;
    for (i, p) in hull.iter().enumerate() {
        for q in &hull[i + 1..] {
            diameter = diameter.max((p - q).norm());
        }
    }
    let (k_min, k_max) = match curvature_extrema(domain) {
        Ok((a, b)) => (Some(a), Some(b)),
        Err(_) => (None, None),
    };
    GeometryReport {
        area: domain.area(),
        perimeter: domain.perimeter(),
        convex,
        minimal_width,
        diameter,
        k_min,
        k_max,
    }
}

/// Curvature extrema from the analytic loop metadata; hole loops contribute
/// negative curvature.
pub fn curvature_extrema(domain: &Domain) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, lp) in domain.loops().iter().enumerate() {
        let (a, b) = lp.curve.curvature_range().ok_or_else(|| {
            Error::CurvatureUndefined(format!("loop {i} of '{}' is a polygon", domain.label))
        })?;
        let (a, b) = match lp.kind {
            LoopKind::Outer => (a, b),
            LoopKind::Hole => (-b, -a),
        };
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok((lo, hi))
}
