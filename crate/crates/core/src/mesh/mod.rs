//! Conforming triangle meshes of a [`Domain`](crate::geometry::Domain).

mod triangulate;

pub use triangulate::{triangulate, triangulate_with_points, MIN_ANGLE_DEG};

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::geometry::{cross, Curve, Vec2};

/// Boundary edge `a -> b` with the domain on its left; `loop_id` indexes the
/// domain's loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub loop_id: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Longest edge.
    pub h: f64,
    /// `true` iff the vertex is not on any boundary loop.
    pub interior_mask: Vec<bool>,
    /// Curve of each domain loop, used to snap refined boundary vertices.
    pub loop_curves: Vec<Curve>,
    id: u64,
}

impl Mesh {
    pub(crate) fn from_parts(
        vertices: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        loop_curves: Vec<Curve>,
    ) -> Self {
        let mut interior_mask = vec![true; vertices.len()];
        for e in &boundary_edges {
            interior_mask[e.a] = false;
            interior_mask[e.b] = false;
        }
        let mut mesh = Mesh {
            vertices,
            triangles,
            boundary_edges,
            h: 0.0,
            interior_mask,
            loop_curves,
            id: 0,
        };
        mesh.h = mesh.max_edge_length();
        mesh.id = mesh.fingerprint();
        mesh
    }

    /// Content hash; fields solved on this mesh carry it.
    pub fn id(&self) -> u64 {
        self.id
    }

    fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.vertices.len().hash(&mut hasher);
        for v in &self.vertices {
            v.x.to_bits().hash(&mut hasher);
            v.y.to_bits().hash(&mut hasher);
        }
        self.triangles.hash(&mut hasher);
        hasher.finish()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_interior(&self) -> usize {
        self.interior_mask.iter().filter(|&&b| b).count()
    }

    pub fn triangle_points(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [p, q, r] = self.triangle_points(t);
        0.5 * cross(q - p, r - p)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in 0..self.triangles.len() {
            let [p, q, r] = self.triangle_points(t);
            h = h
                .max((q - p).norm())
                .max((r - q).norm())
                .max((p - r).norm());
        }
        h
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut best = 180.0f64;
        for t in 0..self.triangles.len() {
            let pts = self.triangle_points(t);
            for k in 0..3 {
                let a = pts[(k + 1) % 3] - pts[k];
                let b = pts[(k + 2) % 3] - pts[k];
                best = best.min(cross(a, b).atan2(a.dot(&b)).abs().to_degrees());
            }
        }
        best
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        (self.vertices[e.b] - self.vertices[e.a]).norm()
    }

    pub fn edge_midpoint(&self, e: &BoundaryEdge) -> Vec2 {
        (self.vertices[e.a] + self.vertices[e.b]) * 0.5
    }

    /// Outward unit normal of a boundary edge.
    pub fn edge_normal(&self, e: &BoundaryEdge) -> Vec2 {
        let d = self.vertices[e.b] - self.vertices[e.a];
        Vec2::new(d.y, -d.x) / d.norm()
    }

    pub fn num_loops(&self) -> usize {
        self.loop_curves.len()
    }

    /// Checks every structural invariant; returns a description of the first
    /// violation.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Meshing(msg));
        for t in 0..self.triangles.len() {
            if !(self.triangle_area(t) > 0.0) {
                return bad(format!("triangle {t} has non-positive area"));
            }
        }
        let mut count: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let entry = count.entry(key).or_insert((0, 0));
                entry.0 += 1;
                if a < b {
                    entry.1 += 1;
                }
            }
        }
        let mut boundary = 0usize;
        let mut interior = 0usize;
        for (key, (n, _)) in &count {
            match n {
                1 => boundary += 1,
                2 => interior += 1,
                _ => return bad(format!("edge {key:?} shared by {n} triangles")),
            }
        }
        if boundary != self.boundary_edges.len() {
            return bad(format!(
                "{} boundary edges recorded, {boundary} found",
                self.boundary_edges.len()
            ));
        }
        if 3 * self.triangles.len() != 2 * interior + boundary {
            return bad("edge count relation 3T = 2E_int + E_b violated".into());
        }
        let mut next: HashMap<usize, usize> = HashMap::new();
        for e in &self.boundary_edges {
            if count.get(&(e.a.min(e.b), e.a.max(e.b))).map(|c| c.0) != Some(1) {
                return bad(format!(
                    "recorded boundary edge {e:?} is not on the boundary"
                ));
            }
            if next.insert(e.a, e.b).is_some() {
                return bad(format!("boundary vertex {} starts two edges", e.a));
            }
        }
        // cycles close and never mix loops
        let loop_of: HashMap<usize, usize> = self
            .boundary_edges
            .iter()
            .map(|e| (e.a, e.loop_id))
            .collect();
        for e in &self.boundary_edges {
            match next.get(&e.b) {
                Some(_) if loop_of[&e.b] == e.loop_id => {}
                _ => return bad(format!("boundary cycle broken after edge {e:?}")),
            }
        }
        Ok(())
    }

    /// Splits every triangle into four through its edge midpoints. Midpoints of
    /// boundary edges on circles or ellipses are moved onto the exact curve.
    pub fn refine(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let boundary_loop: HashMap<(usize, usize), usize> = self
            .boundary_edges
            .iter()
            .map(|e| ((e.a.min(e.b), e.a.max(e.b)), e.loop_id))
            .collect();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec2>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let mut p = (vertices[a] + vertices[b]) * 0.5;
                if let Some(&l) = boundary_loop.get(&key) {
                    p = self.loop_curves[l].snap(p);
                }
                vertices.push(p);
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        let mut boundary_edges = Vec::with_capacity(2 * self.boundary_edges.len());
        for e in &self.boundary_edges {
            let m = mid[&(e.a.min(e.b), e.a.max(e.b))];
            boundary_edges.push(BoundaryEdge {
                a: e.a,
                b: m,
                loop_id: e.loop_id,
            });
            boundary_edges.push(BoundaryEdge {
                a: m,
                b: e.b,
                loop_id: e.loop_id,
            });
        }
        Mesh::from_parts(
            vertices,
            triangles,
            boundary_edges,
            self.loop_curves.clone(),
        )
    }

    /// The same mesh mapped by `x -> m x + t` (orientation-preserving `m`).
    pub fn transformed(&self, m: Matrix2<f64>, t: Vec2) -> Mesh {
        let vertices = self.vertices.iter().map(|p| m * p + t).collect();
        let curves = self.loop_curves.iter().map(|_| Curve::Segments).collect();
        Mesh::from_parts(
            vertices,
            self.triangles.clone(),
            self.boundary_edges.clone(),
            curves,
        )
    }

    pub fn scaled(&self, s: f64) -> Mesh {
        let mut out = self.transformed(Matrix2::identity() * s, Vec2::zeros());
        out.loop_curves = self
            .loop_curves
            .iter()
            .map(|c| match *c {
                Curve::Segments => Curve::Segments,
                Curve::Circle { center, radius } => Curve::Circle {
                    center: center * s,
                    radius: radius * s,
                },
                Curve::Ellipse {
                    center,
                    a,
                    b,
                    angle,
                } => Curve::Ellipse {
                    center: center * s,
                    a: a * s,
                    b: b * s,
                    angle,
                },
            })
            .collect();
        out
    }

    /// Triangle containing `p` and its barycentric coordinates.
    pub fn locate(&self, p: Vec2) -> Option<(usize, [f64; 3])> {
        let tol = -1e-12;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle_points(t);
            let det = cross(b - a, c - a);
            let l1 = cross(p - a, c - a) / det;
            let l2 = cross(b - a, p - a) / det;
            let l0 = 1.0 - l1 - l2;
            let worst = l0.min(l1).min(l2);
            if worst >= tol {
                return Some((t, [l0, l1, l2]));
            }
            if best.as_ref().is_none_or(|(_, _, w)| worst > *w) {
                best = Some((t, [l0, l1, l2], worst));
            }
        }
        best.filter(|(_, _, w)| *w > -1e-9).map(|(t, l, _)| (t, l))
    }

    /// P1 interpolation of vertex values at `p`.
    pub fn interpolate(&self, values: &[f64], p: Vec2) -> Option<f64> {
        let (t, l) = self.locate(p)?;
        let [a, b, c] = self.triangles[t];
        Some(l[0] * values[a] + l[1] * values[b] + l[2] * values[c])
    }

    /// Index of a vertex coinciding with `p`, if any.
    pub fn find_vertex(&self, p: Vec2, tol: f64) -> Option<usize> {
        self.vertices.iter().position(|v| (v - p).norm() <= tol)
    }

    /// Vertex–vertex adjacency lists (sorted).
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &[a, b, c] in &self.triangles {
            for (i, j) in [(a, b), (b, c), (c, a)] {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Plain-text export: vertex count then `x y` lines, triangle count then
    /// `i j k` lines, boundary-edge count then `i j loop_id` lines.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(out, "{:.17e} {:.17e}", v.x, v.y)?;
        }
        writeln!(out, "{}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(out, "{}", self.boundary_edges.len())?;
        for e in &self.boundary_edges {
            writeln!(out, "{} {} {}", e.a, e.b, e.loop_id)?;
        }
        Ok(())
    }

    /// Reads the format written by [`Mesh::write_text`]. Curve metadata is not
    /// part of the format; loops come back as straight segments.
    pub fn read_text<R: BufRead>(input: R) -> Result<Mesh> {
        let mut lines = input.lines();
        let mut next_line = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Meshing("unexpected end of mesh file".into()))?
                .map_err(Error::Io)
        };
        fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
            s.trim()
                .parse()
                .map_err(|_| Error::Meshing(format!("cannot parse '{s}'")))
        }
        let nv: usize = parse(&next_line()?)?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let l = next_line()?;
            let f: Vec<f64> = l.split_whitespace().map(parse).collect::<Result<_>>()?;
            if f.len() != 2 {
                return Err(Error::Meshing(format!("bad vertex line '{l}'")));
            }
            vertices.push(Vec2::new(f[0], f[1]));
        }
        let nt: usize = parse(&next_line()?)?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let l = next_line()?;
            let f: Vec<usize> = l.split_whitespace().map(parse).collect::<Result<_>>()?;
            if f.len() != 3 || f.iter().any(|&i| i >= nv) {
                return Err(Error::Meshing(format!("bad triangle line '{l}'")));
            }
            triangles.push([f[0], f[1], f[2]]);
        }
        let nb: usize = parse(&next_line()?)?;
        let mut edges = Vec::with_capacity(nb);
        let mut n_loops = 0;
        for _ in 0..nb {
            let l = next_line()?;
            let f: Vec<usize> = l.split_whitespace().map(parse).collect::<Result<_>>()?;
            if f.len() != 3 || f[0] >= nv || f[1] >= nv {
                return Err(Error::Meshing(format!("bad boundary line '{l}'")));
            }
            n_loops = n_loops.max(f[2] + 1);
            edges.push(BoundaryEdge {
                a: f[0],
                b: f[1],
                loop_id: f[2],
            });
        }
        let mesh = Mesh::from_parts(vertices, triangles, edges, vec![Curve::Segments; n_loops]);
        mesh.validate()?;
        Ok(mesh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec};
    use approx::assert_relative_eq;

    fn square_mesh(h: f64) -> Mesh {
        triangulate(&build_domain(&DomainSpec::unit_square()).unwrap(), h).unwrap()
    }

    #[test]
    fn unit_square_mesh() {
        let m = square_mesh(0.1);
        m.validate().unwrap();
        assert!(m.h <= 0.1);
        assert_relative_eq!(m.area(), 1.0, epsilon = 1e-12);
        assert!(m.min_angle_deg() >= MIN_ANGLE_DEG);
        assert!(m.num_interior() > 0);
    }

    #[test]
    fn rectangle_boundary_on_box() {
        let d = build_domain(&DomainSpec::Rectangle { n: 5.0 }).unwrap();
        let m = triangulate(&d, 0.05).unwrap();
        assert_relative_eq!(m.area(), 10.0, epsilon = 1e-12);
        for (i, v) in m.vertices.iter().enumerate() {
            if !m.interior_mask[i] {
                assert!(
                    v.y == 0.0 || v.y == 1.0 || v.x == -5.0 || v.x == 5.0,
                    "{v:?}"
                );
            }
        }
    }

    #[test]
    fn perforated_square_keeps_all_holes() {
        let params = crate::geometry::PerforationParams::new(1.0 / 8.0, 0.05).unwrap();
        let d = build_domain(&DomainSpec::Perforated {
            base: Box::new(DomainSpec::unit_square()),
            params,
        })
        .unwrap();
        let m = triangulate(&d, 0.01).unwrap();
        m.validate().unwrap();
        let mut loops: Vec<usize> = m.boundary_edges.iter().map(|e| e.loop_id).collect();
        loops.sort_unstable();
        loops.dedup();
        assert_eq!(loops.len(), 17);
        // boundary vertices on the holes sit on the exact circles
        let exact = 1.0 - 16.0 * std::f64::consts::PI * params.r_eps * params.r_eps;
        assert!(m.area() <= d.area() && m.area() >= exact - 1e-12);
    }

    #[test]
    fn coarse_mesh_on_small_hole_is_rejected() {
        let params = crate::geometry::PerforationParams::new(1.0 / 8.0, 0.05).unwrap();
        let d = build_domain(&DomainSpec::Perforated {
            base: Box::new(DomainSpec::unit_square()),
            params,
        })
        .unwrap();
        let err = triangulate(&d, 0.2).unwrap_err();
        assert!(matches!(err, Error::UnresolvedFeature { loop_id, .. } if loop_id >= 1));
    }

    #[test]
    fn refinement_counts_and_area() {
        let m = square_mesh(0.2);
        let r = m.refine();
        r.validate().unwrap();
        assert_eq!(r.num_triangles(), 4 * m.num_triangles());
        assert_relative_eq!(r.area(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.h, m.h / 2.0, max_relative = 1e-12);
        let rr = r.refine();
        assert_eq!(rr.num_triangles(), 16 * m.num_triangles());
        assert_relative_eq!(rr.h, m.h / 4.0, max_relative = 1e-12);
    }

    #[test]
    fn disk_refinement_snaps_to_circle() {
        let d = build_domain(&DomainSpec::unit_disk(64)).unwrap();
        let m = triangulate(&d, 0.2).unwrap().refine();
        for e in &m.boundary_edges {
            assert_relative_eq!(m.vertices[e.a].norm(), 1.0, epsilon = 1e-12);
        }
        m.validate().unwrap();
    }

    #[test]
    fn triangulation_is_deterministic() {
        let a = square_mesh(0.07);
        let b = square_mesh(0.07);
        assert_eq!(a.id(), b.id());
        assert_eq!(a.triangles, b.triangles);
    }

    #[test]
    fn text_round_trip() {
        let m = square_mesh(0.3);
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = Mesh::read_text(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.boundary_edges, m.boundary_edges);
        assert_eq!(back.id(), m.id());
    }

    #[test]
    fn extra_points_become_vertices() {
        let d = build_domain(&DomainSpec::unit_disk(64)).unwrap();
        let p = Vec2::new(0.9, 0.0);
        let m = triangulate_with_points(&d, 0.1, &[p, Vec2::zeros()]).unwrap();
        assert!(m.find_vertex(p, 0.0).is_some());
        assert!(m.find_vertex(Vec2::zeros(), 0.0).is_some());
        let r = m.refine();
        assert!(r.find_vertex(p, 0.0).is_some());
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let m = square_mesh(0.1);
        let f: Vec<f64> = m.vertices.iter().map(|v| 2.0 * v.x - v.y + 0.5).collect();
        let p = Vec2::new(0.3141, 0.2718);
        assert_relative_eq!(
            m.interpolate(&f, p).unwrap(),
            2.0 * p.x - p.y + 0.5,
            epsilon = 1e-12
        );
    }
}
