use super::*;
use crate::fem::solve_torsion;
use crate::geometry::{build_domain, DomainSpec};
use crate::mesh::triangulate_with_points;
use approx::assert_relative_eq;

const J01: f64 = 2.404825557695773;

fn domain(spec: DomainSpec) -> Domain {
    build_domain(&spec).unwrap()
}

#[test]
fn triangle_maximum_at_centroid() {
    let d = domain(DomainSpec::EquilateralTriangle { side: 1.0 });
    let m = triangulate(&d, 0.02).unwrap();
    let u = solve_torsion(&m).unwrap();
    let mp = locate_max(&m, &u).unwrap();
    assert!(mp.x0.norm() <= 10.0 * m.h * m.h, "{:?}", mp.x0);
    assert_relative_eq!(mp.value, 1.0 / 36.0, max_relative = 5e-3);
    assert!(mp.unique);
    assert!(mp.hessian.symmetric_eigenvalues().iter().all(|e| *e < 0.0));
}

#[test]
fn disk_maximum_hessian() {
    let d = domain(DomainSpec::unit_disk(128));
    let m = triangulate(&d, 0.04).unwrap();
    let u = solve_torsion(&m).unwrap();
    let mp = locate_max(&m, &u).unwrap();
    assert!(mp.x0.norm() < 0.01);
    for e in mp.hessian.symmetric_eigenvalues().iter() {
        assert_relative_eq!(*e, -0.5, max_relative = 0.05);
    }
    assert!(mp.value >= u.max());
}

#[test]
fn rectangle_maximum_on_midline() {
    let d = domain(DomainSpec::Rectangle { n: 5.0 });
    let m = triangulate(&d, 0.05).unwrap();
    let u = solve_torsion(&m).unwrap();
    let mp = locate_max(&m, &u).unwrap();
    assert!((mp.x0.y - 0.5).abs() < 0.01, "{:?}", mp.x0);
}

#[test]
fn mismatched_field_rejected() {
    let d = domain(DomainSpec::unit_square());
    let m = triangulate(&d, 0.2).unwrap();
    let u = solve_torsion(&m.refine()).unwrap();
    assert!(matches!(locate_max(&m, &u), Err(Error::MeshMismatch)));
}

#[test]
fn disk_is_critical() {
    let d = domain(DomainSpec::unit_disk(256));
    let (_, r) = optimality_residual(&d, 0.02).unwrap();
    assert!(r.normalized_sup <= 0.02, "{}", r.normalized_sup);
    assert!(r.mean_ratio.abs() <= 1e-3, "{}", r.mean_ratio);
    assert_relative_eq!(r.green_flux_total, -1.0, epsilon = 1e-8);
    // both terms of the residual equal G / perimeter = j²/(8π) on the unit disk
    assert_relative_eq!(
        r.max_torsion * r.lambda1 / r.perimeter,
        J01 * J01 / (8.0 * std::f64::consts::PI),
        max_relative = 1e-3
    );
}

#[test]
fn triangle_is_not_critical() {
    let d = domain(DomainSpec::EquilateralTriangle { side: 1.0 });
    let (_, r) = optimality_residual(&d, 0.01).unwrap();
    assert!(r.normalized_sup > 0.2, "{}", r.normalized_sup);
    assert!(r.dilation_ratio.abs() <= 1e-3, "{}", r.dilation_ratio);
}

#[test]
fn rigid_and_dilation_derivatives_vanish() {
    for (spec, h) in [
        (DomainSpec::unit_disk(128), 0.04),
        (DomainSpec::EquilateralTriangle { side: 1.0 }, 0.01),
    ] {
        let d = domain(spec);
        for v in [
            ShapeVelocity::translation(Vec2::new(1.0, 0.0)),
            ShapeVelocity::translation(Vec2::new(0.3, -0.7)),
            ShapeVelocity::dilation(Vec2::zeros()),
        ] {
            let r = shape_derivative(&d, &v, h, 2).unwrap();
            assert!(
                r.g_prime.abs() <= 1e-3 * r.g,
                "{} {:?}: {}",
                d.label,
                v,
                r.g_prime
            );
            let sum = r.lambda_times_m_prime + r.m_times_lambda_prime;
            assert!((sum - r.g_prime).abs() <= 1e-8 * r.g.max(r.g_prime.abs()));
            assert!(!r.extended_beyond_hypotheses);
        }
    }
}

#[test]
fn polygon_velocity_interpolates_along_edges() {
    let v = ShapeVelocity::Polygon {
        vertices: vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ],
        displacements: vec![Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::zeros()],
    };
    let p = v.eval(Vec2::new(0.25, 0.0));
    assert_relative_eq!(p.x, 0.75);
    assert_relative_eq!(p.y, 0.25);
    assert!(ShapeVelocity::by_name("squeeze").is_some());
    assert!(ShapeVelocity::by_name("twist").is_none());
}

#[test]
fn green_function_symmetry_on_disk() {
    let d = domain(DomainSpec::unit_disk(128));
    let x = Vec2::new(0.3, 0.0);
    let m = triangulate_with_points(&d, 0.04, &[Vec2::zeros(), x]).unwrap();
    let level = LevelSolution::solve(m).unwrap();
    let (a, b) = green_symmetry(&level, Vec2::new(0.0, 0.05), x).unwrap();
    assert_relative_eq!(a, b, max_relative = 1e-2);
    let exact = -(0.3f64).ln() / (2.0 * std::f64::consts::PI);
    let (c, _) = green_symmetry(&level, Vec2::zeros(), x).unwrap();
    assert_relative_eq!(c, exact, max_relative = 1e-2);
    let direct = {
        let g = level
            .disc
            .solve_green(&level.mesh, level.max_point.x0)
            .unwrap();
        r_value(&level, &g, x).unwrap()
    };
    let swapped = r_value_swapped(&level, x).unwrap();
    assert_relative_eq!(direct, swapped, max_relative = 1e-2);
}

#[test]
fn topological_field_positive_near_disk_boundary() {
    let d = domain(DomainSpec::unit_disk(128));
    let pts = [Vec2::new(0.9, 0.0), Vec2::new(0.95, 0.0)];
    let vals = topological_field(&d, &pts, 0.02, 2).unwrap();
    for v in &vals {
        assert!(v.value > 0.0, "{v:?}");
    }
    assert!(matches!(
        topological_field(&d, &[Vec2::new(0.01, 0.0)], 0.05, 2),
        Err(Error::InvalidPoint(_))
    ));
}
