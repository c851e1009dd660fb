use super::{cross, signed_area, Vec2};
use crate::error::{Error, Result};

/// Relative tolerance on turning cross products.
const TURN_TOL: f64 = 1e-12;

/// Counter-clockwise convex hull (Andrew's monotone chain), collinear points dropped.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Vec2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2
            && cross(
                lower[lower.len() - 1] - lower[lower.len() - 2],
                p - lower[lower.len() - 2],
            ) <= 0.0
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Vec2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2
            && cross(
                upper[upper.len() - 1] - upper[upper.len() - 2],
                p - upper[upper.len() - 2],
            ) <= 0.0
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// True when every turn of the closed polygon is a left turn or straight.
/// Orientation-independent.
pub fn is_convex_polygon(points: &[Vec2]) -> bool {
    let n = points.len();
    if n < 3 {
        return false;
    }
    let sign = signed_area(points).signum();
    if sign == 0.0 {
        return false;
    }
    (0..n).all(|i| {
        let a = points[(i + n - 1) % n];
        let b = points[i];
        let c = points[(i + 1) % n];
        let (e1, e2) = (b - a, c - b);
        sign * cross(e1, e2) >= -TURN_TOL * e1.norm() * e2.norm()
    })
}

/// Minimal distance between two parallel supporting lines, by rotating calipers
/// over a counter-clockwise convex hull.
pub fn minimal_width(hull: &[Vec2]) -> f64 {
    let m = hull.len();
    if m < 3 {
        return 0.0;
    }
    let dist = |i: usize, j: usize| {
        let a = hull[i];
        let b = hull[(i + 1) % m];
        cross(b - a, hull[j % m] - a) / (b - a).norm()
    };
    let mut j = 1;
    let mut best = f64::INFINITY;
    for i in 0..m {
        if j == i {
            j = (i + 1) % m;
        }
        while dist(i, (j + 1) % m) >= dist(i, j) {
            j = (j + 1) % m;
        }
        best = best.min(dist(i, j));
    }
    best
}

/// Moves every vertex radially (about the polygon's area centroid) onto the
/// boundary of the convex hull of the vertex set. Hull vertices stay put and
/// reflex vertices land on the chord of the hull edge facing them; this is the
/// smallest outward radial change that removes all reflex turns. The result is
/// counter-clockwise and the map is the identity on convex input.
pub fn convex_project(vertices: &[Vec2]) -> Result<Vec<Vec2>> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("{n} vertices")));
    }
    let area = signed_area(vertices);
    let scale = vertices
        .iter()
        .map(|p| (p - vertices[0]).norm())
        .fold(0.0, f64::max);
    if !(area.abs() > 1e-12 * scale * scale) {
        return Err(Error::Degenerate("zero area".into()));
    }
    let mut pts = vertices.to_vec();
    if area < 0.0 {
        pts.reverse();
    }
    let centroid = polygon_centroid(&pts);
    let angles: Vec<f64> = pts
        .iter()
        .map(|p| (p.y - centroid.y).atan2(p.x - centroid.x))
        .collect();
    // vertices must wind once around the centroid
    let mut total = 0.0;
    for i in 0..n {
        let mut d = angles[(i + 1) % n] - angles[i];
        if d <= -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        if d <= 0.0 || d >= std::f64::consts::PI {
            return Err(Error::Degenerate(
                "polygon is not star-shaped about its centroid".into(),
            ));
        }
        total += d;
    }
    if (total - 2.0 * std::f64::consts::PI).abs() > 1e-9 {
        return Err(Error::Degenerate("vertices do not wind once".into()));
    }
    if is_convex_polygon(&pts) {
        return Ok(pts);
    }
    let hull = convex_hull(&pts);
    let out = pts
        .iter()
        .map(|&p| {
            if hull.iter().any(|h| *h == p) {
                return p;
            }
            radial_hit(&hull, centroid, p - centroid).unwrap_or(p)
        })
        .collect();
    Ok(out)
}

/// Area centroid of a simple polygon.
pub fn polygon_centroid(points: &[Vec2]) -> Vec2 {
    let n = points.len();
    let mut a = 0.0;
    let mut c = Vec2::zeros();
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        let w = cross(p, q);
        a += w;
        c += (p + q) * w;
    }
    c / (3.0 * a)
}

/// Point where the ray `origin + t dir` (t > 0) leaves the convex hull.
fn radial_hit(hull: &[Vec2], origin: Vec2, dir: Vec2) -> Option<Vec2> {
    let m = hull.len();
    let mut best: Option<f64> = None;
    for i in 0..m {
        let a = hull[i] - origin;
        let b = hull[(i + 1) % m] - origin;
        let e = b - a;
        let denom = cross(dir, e);
        if denom.abs() < 1e-300 {
            continue;
        }
        let t = cross(a, e) / denom;
        let s = cross(a, dir) / denom;
        if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) {
            best = Some(best.map_or(t, |b: f64| b.min(t)));
        }
    }
    best.map(|t| origin + dir * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn square() -> Vec<Vec2> {
        vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn convex_square_unchanged() {
        let out = convex_project(&square()).unwrap();
        assert_eq!(out, square());
    }

    #[test]
    fn pushed_in_vertex_goes_to_chord() {
        let mut pts = square();
        pts[2] = Vec2::new(0.3, 0.3);
        let out = convex_project(&pts).unwrap();
        assert!(is_convex_polygon(&out));
        // lands on the diagonal x + y = 1
        assert_relative_eq!(out[2].x + out[2].y, 1.0, epsilon = 1e-12);
        assert_eq!(out[0], pts[0]);
        assert_eq!(out[1], pts[1]);
        assert_eq!(out[3], pts[3]);
    }

    #[test]
    fn collinear_input_rejected() {
        let pts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
        ];
        assert!(matches!(convex_project(&pts), Err(Error::Degenerate(_))));
    }

    #[test]
    fn width_of_triangle_is_height() {
        let h = convex_hull(&[
            Vec2::new(-0.5, 0.0),
            Vec2::new(0.5, 0.0),
            Vec2::new(0.0, 3f64.sqrt() / 2.0),
        ]);
        assert_relative_eq!(minimal_width(&h), 3f64.sqrt() / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn width_matches_brute_force_on_random_hulls() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let pts: Vec<Vec2> = (0..20)
                .map(|_| Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-0.3..0.3)))
                .collect();
            let hull = convex_hull(&pts);
            let m = hull.len();
            let brute = (0..m)
                .map(|i| {
                    let a = hull[i];
                    let b = hull[(i + 1) % m];
                    hull.iter()
                        .map(|p| cross(b - a, p - a) / (b - a).norm())
                        .fold(0.0, f64::max)
                })
                .fold(f64::INFINITY, f64::min);
            assert_relative_eq!(minimal_width(&hull), brute, epsilon = 1e-12);
        }
    }

    #[test]
    fn noisy_pentagon_projection() {
        // one reflex vertex from 1% radial noise
        let radii = [1.0, 0.99, 1.01, 1.0, 0.995];
        let mut pts: Vec<Vec2> = (0..5)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 5.0;
                Vec2::new(radii[k] * t.cos(), radii[k] * t.sin())
            })
            .collect();
        pts[1] *= 0.25; // push inside the chord of its neighbours
        let reflex_before = !is_convex_polygon(&pts);
        assert!(reflex_before);
        let out = convex_project(&pts).unwrap();
        assert!(is_convex_polygon(&out));
        let perturbation = (1.0 - 0.25) * 0.99;
        let hausdorff = pts
            .iter()
            .zip(&out)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(hausdorff <= perturbation + 1e-12, "{hausdorff}");
    }

    proptest! {
        #[test]
        fn projection_is_convex_and_idempotent(
            radii in proptest::collection::vec(0.5f64..1.5, 5..12)
        ) {
            let n = radii.len();
            let pts: Vec<Vec2> = radii
                .iter()
                .enumerate()
                .map(|(k, r)| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    Vec2::new(r * t.cos(), r * t.sin())
                })
                .collect();
            let out = convex_project(&pts).unwrap();
            prop_assert!(is_convex_polygon(&out));
            let again = convex_project(&out).unwrap();
            prop_assert_eq!(again, out.clone());
            // only outward radial moves about the centroid
            let c = polygon_centroid(&pts);
            for (a, b) in pts.iter().zip(&out) {
                prop_assert!((b - c).norm() >= (a - c).norm() - 1e-12);
                prop_assert!(cross(a - c, b - c).abs() < 1e-9);
            }
        }

        #[test]
        fn convexity_test_matches_cross_products(
            radii in proptest::collection::vec(0.5f64..1.5, 3..10)
        ) {
            let n = radii.len();
            let pts: Vec<Vec2> = radii
                .iter()
                .enumerate()
                .map(|(k, r)| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    Vec2::new(r * t.cos(), r * t.sin())
                })
                .collect();
            let all_left = (0..n).all(|i| {
                let a = pts[(i + n - 1) % n];
                let b = pts[i];
                let c = pts[(i + 1) % n];
                cross(b - a, c - b) >= 0.0
            });
            // tolerance only matters for exactly-collinear triples
            prop_assert_eq!(is_convex_polygon(&pts), all_left);
        }
    }
}
