use std::collections::{HashMap, HashSet};

use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation,
};

use super::{BoundaryEdge, Mesh};
use crate::error::{Error, Result};
use crate::geometry::{cross, Domain, LoopKind, Vec2};

/// Angle floor requested from the refinement; input corners sharper than this
/// are kept as they are.
pub const MIN_ANGLE_DEG: f64 = 20.0;

const REFINE_ANGLE_DEG: f64 = 25.0;

/// Constrained Delaunay triangulation with quality refinement; every edge is at
/// most `h_target` long.
pub fn triangulate(domain: &Domain, h_target: f64) -> Result<Mesh> {
    triangulate_with_points(domain, h_target, &[])
}

/// As [`triangulate`], with `extra` interior points forced to be mesh vertices.
pub fn triangulate_with_points(domain: &Domain, h_target: f64, extra: &[Vec2]) -> Result<Mesh> {
    if !(h_target > 0.0) || !h_target.is_finite() {
        return Err(Error::InvalidParameter(format!("h_target = {h_target}")));
    }
    check_features(domain, h_target)?;

    let mut points: Vec<Vec2> = Vec::new();
    let mut point_loop: Vec<Option<usize>> = Vec::new();
    let mut edges: Vec<[usize; 2]> = Vec::new();
    for (li, lp) in domain.loops().iter().enumerate() {
        let start = points.len();
        // segments are handed over unsplit: the refinement treats two steiner
        // points on neighbouring input segments as a sharp input corner and
        // stops improving triangles there
        for &p in &lp.points {
            points.push(p);
            point_loop.push(Some(li));
        }
        let end = points.len();
        for i in start..end {
            let j = if i + 1 == end { start } else { i + 1 };
            edges.push([i, j]);
        }
    }
    for &p in extra {
        if !domain.contains(p) || domain.boundary_distance(p) < 0.25 * h_target {
            return Err(Error::InvalidPoint(format!(
                "extra vertex ({}, {}) is outside the domain or too close to its boundary",
                p.x, p.y
            )));
        }
        points.push(p);
        point_loop.push(None);
    }

    let input_len = points.len();
    let mut max_area = 0.5 * 3f64.sqrt() / 4.0 * h_target * h_target;
    for _attempt in 0..30 {
        let mesh = snap_boundary(run_cdt(domain, &points, &edges, &point_loop, max_area)?);
        if mesh.h <= h_target {
            debug_assert!(mesh.num_vertices() >= input_len);
            if mesh.num_interior() == 0 {
                return Err(Error::MeshTooCoarse);
            }
            return Ok(mesh);
        }
        max_area *= (0.95 * (h_target / mesh.h).powi(2)).min(0.9);
    }
    Err(Error::Meshing(format!(
        "could not reach edge length {h_target} on '{}'",
        domain.label
    )))
}

/// Moves boundary vertices inserted by the refinement onto the exact curve of
/// their loop; without this the chords they sit on would stay in every
/// refined mesh.
fn snap_boundary(mesh: Mesh) -> Mesh {
    if !mesh.loop_curves.iter().any(|c| c.is_analytic()) {
        return mesh;
    }
    let mut vertices = mesh.vertices.clone();
    for e in &mesh.boundary_edges {
        let curve = &mesh.loop_curves[e.loop_id];
        vertices[e.a] = curve.snap(mesh.vertices[e.a]);
    }
    let snapped = Mesh::from_parts(
        vertices,
        mesh.triangles.clone(),
        mesh.boundary_edges.clone(),
        mesh.loop_curves.clone(),
    );
    if snapped.validate().is_ok() {
        snapped
    } else {
        mesh
    }
}

fn check_features(domain: &Domain, h_target: f64) -> Result<()> {
    for (i, lp) in domain.loops().iter().enumerate() {
        // 2|A|/L is the radius for a circle and half the width for a long strip
        let size = 2.0 * lp.signed_area().abs() / lp.length();
        if size < 0.5 * h_target {
            let what = match lp.kind {
                LoopKind::Hole => "hole",
                LoopKind::Outer => "component",
            };
            return Err(Error::UnresolvedFeature {
                loop_id: i,
                reason: format!(
                    "{what} of size {size:.3e} is below h_target/2 = {:.3e}",
                    h_target / 2.0
                ),
            });
        }
    }
    let loops = domain.loops();
    for i in 0..loops.len() {
        for j in i + 1..loops.len() {
            let gap = loops[j]
                .points
                .iter()
                .map(|&p| loops[i].distance_to(p))
                .fold(f64::INFINITY, f64::min);
            if gap < 0.25 * h_target {
                return Err(Error::UnresolvedFeature {
                    loop_id: j,
                    reason: format!("neck of width {gap:.3e} to loop {i}"),
                });
            }
        }
    }
    Ok(())
}

fn run_cdt(
    domain: &Domain,
    points: &[Vec2],
    edges: &[[usize; 2]],
    point_loop: &[Option<usize>],
    max_area: f64,
) -> Result<Mesh> {
    let verts: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p.x, p.y)).collect();
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::bulk_load_cdt(verts, edges.to_vec())
            .map_err(|e| Error::Meshing(format!("{e:?}")))?;
    if cdt.num_vertices() != points.len() {
        return Err(Error::Meshing("duplicate input vertices".into()));
    }
    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(REFINE_ANGLE_DEG))
        .with_max_allowed_area(max_area)
        .exclude_outer_faces(true)
        .with_max_additional_vertices(50_000_000);
    let result = cdt.refine(params);
    if !result.refinement_complete {
        return Err(Error::Meshing("refinement did not complete".into()));
    }
    let excluded: HashSet<_> = result.excluded_faces.into_iter().collect();

    // compact numbering over vertices used by inner faces, in handle order
    let mut raw_tris: Vec<[usize; 3]> = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        let v = face.vertices();
        raw_tris.push([v[0].fix().index(), v[1].fix().index(), v[2].fix().index()]);
    }
    let all_pos: Vec<Vec2> = cdt
        .vertices()
        .map(|v| {
            let p = v.position();
            Vec2::new(p.x, p.y)
        })
        .collect();
    let mut new_index = vec![usize::MAX; all_pos.len()];
    let mut used: Vec<bool> = vec![false; all_pos.len()];
    for t in &raw_tris {
        for &i in t {
            used[i] = true;
        }
    }
    let mut vertices = Vec::new();
    for (i, u) in used.iter().enumerate() {
        if *u {
            new_index[i] = vertices.len();
            vertices.push(all_pos[i]);
        }
    }
    let mut triangles: Vec<[usize; 3]> = raw_tris
        .iter()
        .map(|t| [new_index[t[0]], new_index[t[1]], new_index[t[2]]])
        .collect();
    for t in &mut triangles {
        let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
        if cross(b - a, c - a) < 0.0 {
            t.swap(1, 2);
        }
    }
    // boundary edges: directed edges whose reverse is absent
    let mut directed: HashSet<(usize, usize)> = HashSet::new();
    for t in &triangles {
        for k in 0..3 {
            directed.insert((t[k], t[(k + 1) % 3]));
        }
    }
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut order: Vec<usize> = Vec::new();
    for t in &triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if !directed.contains(&(b, a)) {
                if next.insert(a, b).is_some() {
                    return Err(Error::Meshing(format!("boundary vertex {a} is pinched")));
                }
                order.push(a);
            }
        }
    }
    order.sort_unstable();
    // loop id of each cycle from any original loop vertex on it
    let mut known_loop: HashMap<usize, usize> = HashMap::new();
    for (i, l) in point_loop.iter().enumerate() {
        if let Some(l) = l {
            if new_index[i] != usize::MAX {
                known_loop.insert(new_index[i], *l);
            }
        }
    }
    let mut visited: HashSet<usize> = HashSet::new();
    let mut boundary_edges = Vec::with_capacity(order.len());
    let mut loops_seen = HashSet::new();
    for &start in &order {
        if visited.contains(&start) {
            continue;
        }
        let mut cycle = vec![start];
        let mut cur = start;
        visited.insert(start);
        loop {
            let nx = *next
                .get(&cur)
                .ok_or_else(|| Error::Meshing("open boundary chain".into()))?;
            if nx == start {
                break;
            }
            if !visited.insert(nx) {
                return Err(Error::Meshing("boundary chains overlap".into()));
            }
            cycle.push(nx);
            cur = nx;
        }
        let loop_id = cycle
            .iter()
            .find_map(|v| known_loop.get(v).copied())
            .ok_or_else(|| Error::Meshing("boundary cycle without a domain loop".into()))?;
        if cycle
            .iter()
            .any(|v| known_loop.get(v).is_some_and(|&l| l != loop_id))
        {
            return Err(Error::Meshing("boundary cycle mixes loops".into()));
        }
        if !loops_seen.insert(loop_id) {
            return Err(Error::Meshing(format!(
                "loop {loop_id} split into several cycles"
            )));
        }
        for (k, &a) in cycle.iter().enumerate() {
            boundary_edges.push(BoundaryEdge {
                a,
                b: cycle[(k + 1) % cycle.len()],
                loop_id,
            });
        }
    }
    if loops_seen.len() != domain.loops().len() {
        return Err(Error::Meshing(format!(
            "{} boundary cycles for {} loops",
            loops_seen.len(),
            domain.loops().len()
        )));
    }
    let curves = domain.loops().iter().map(|l| l.curve).collect();
    Ok(Mesh::from_parts(
        vertices,
        triangles,
        boundary_edges,
        curves,
    ))
}
