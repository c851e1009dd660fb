use super::*;
use crate::geometry::{build_domain, DomainSpec};
use crate::mesh::{triangulate, triangulate_with_points};
use approx::assert_relative_eq;

const J01: f64 = 2.404825557695773;

fn mesh_of(spec: &DomainSpec, h: f64) -> Mesh {
    triangulate(&build_domain(spec).unwrap(), h).unwrap()
}

fn disk_mesh(h: f64) -> Mesh {
    let d = build_domain(&DomainSpec::unit_disk(128)).unwrap();
    triangulate_with_points(&d, h, &[Vec2::zeros()]).unwrap()
}

#[test]
fn disk_torsion_center_value() {
    let m = disk_mesh(0.08).refine();
    let u = solve_torsion(&m).unwrap();
    let c = m.find_vertex(Vec2::zeros(), 0.0).unwrap();
    assert_relative_eq!(u.values[c], 0.25, max_relative = 5e-3);
    assert!(u.values.iter().all(|v| *v >= -1e-12));
}

#[test]
fn triangle_torsion_center_value() {
    let m = mesh_of(&DomainSpec::EquilateralTriangle { side: 1.0 }, 0.02);
    let u = solve_torsion(&m).unwrap();
    assert_relative_eq!(
        u.interpolate(&m, Vec2::zeros()).unwrap(),
        1.0 / 36.0,
        max_relative = 5e-3
    );
}

#[test]
fn square_torsion_center_value() {
    let m = mesh_of(&DomainSpec::unit_square(), 0.02);
    let u = solve_torsion(&m).unwrap();
    assert_relative_eq!(
        u.interpolate(&m, Vec2::new(0.5, 0.5)).unwrap(),
        0.073671348506361,
        max_relative = 5e-3
    );
}

#[test]
fn screened_with_zero_constant_is_torsion() {
    let m = mesh_of(&DomainSpec::unit_square(), 0.1);
    let d = Discretization::new(&m).unwrap();
    assert_eq!(
        d.solve_screened(0.0).unwrap().values,
        d.solve_torsion().unwrap().values
    );
}

#[test]
fn screened_rescaled_field_is_at_most_one() {
    let m = mesh_of(&DomainSpec::unit_square(), 0.03);
    let a = 100.0;
    let u = solve_screened(&m, a).unwrap();
    let vmax = u.values.iter().map(|v| a * v).fold(f64::MIN, f64::max);
    assert!(vmax <= 1.0 + 1e-10 && vmax > 0.9, "{vmax}");
    for (i, v) in u.values.iter().enumerate() {
        if m.interior_mask[i] {
            assert!(*v > 0.0);
        }
    }
}

#[test]
fn square_eigenvalue_and_rayleigh_quotient() {
    let m = mesh_of(&DomainSpec::unit_square(), 0.03);
    let d = Discretization::new(&m).unwrap();
    let e = d.solve_eigenpair().unwrap();
    let exact = 2.0 * std::f64::consts::PI.powi(2);
    assert!(e.lambda1 >= exact);
    assert_relative_eq!(e.lambda1, exact, max_relative = 5e-3);
    assert_relative_eq!(d.rayleigh_quotient(&e.phi), e.lambda1, max_relative = 1e-10);
    assert_relative_eq!(d.l2_inner(&e.phi, &e.phi), 1.0, epsilon = 1e-12);
    assert!(e.phi.values.iter().all(|v| *v >= -1e-10));
}

#[test]
fn triangle_eigenvalue() {
    let m = mesh_of(&DomainSpec::EquilateralTriangle { side: 1.0 }, 0.015);
    let e = solve_eigenpair(&m).unwrap();
    let exact = 16.0 * std::f64::consts::PI.powi(2) / 3.0;
    assert!(e.lambda1 >= exact);
    assert_relative_eq!(e.lambda1, exact, max_relative = 5e-3);
}

#[test]
fn eigenvalue_decreases_under_refinement() {
    let m = mesh_of(&DomainSpec::unit_square(), 0.1);
    let a = solve_eigenpair(&m).unwrap().lambda1;
    let b = solve_eigenpair(&m.refine()).unwrap().lambda1;
    assert!(b < a);
    assert!(b > 2.0 * std::f64::consts::PI.powi(2));
}

#[test]
fn orthogonality_identity() {
    let m = mesh_of(
        &DomainSpec::Ellipse {
            a: 2.0,
            b: 1.0,
            n_segments: 64,
        },
        0.08,
    );
    let d = Discretization::new(&m).unwrap();
    let u = d.solve_torsion().unwrap();
    let e = d.solve_eigenpair().unwrap();
    let lhs = e.phi.integral(&m);
    let rhs = e.lambda1 * d.l2_inner(&u, &e.phi);
    assert_relative_eq!(lhs, rhs, max_relative = 1e-8);
}

#[test]
fn disk_green_function_at_center() {
    let m = disk_mesh(0.05);
    let d = Discretization::new(&m).unwrap();
    let g = d.solve_green(&m, Vec2::zeros()).unwrap();
    let wmax = g
        .regular_part
        .values
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(wmax <= 1e-3, "{wmax}");
    assert!(d.harmonic_residual(&g.regular_part) < 1e-10);
    let flux = d.green_flux(&m, &g).unwrap();
    assert_relative_eq!(flux.integral(&m), -1.0, epsilon = 1e-8);
    for v in &flux.values {
        assert_relative_eq!(*v, -1.0 / (2.0 * std::f64::consts::PI), max_relative = 1e-2);
    }
}

#[test]
fn green_flux_total_off_center_and_with_holes() {
    let params = crate::geometry::PerforationParams::new(0.25, 0.1).unwrap();
    let spec = DomainSpec::Perforated {
        base: Box::new(DomainSpec::unit_square()),
        params,
    };
    let m = mesh_of(&spec, 0.04);
    let d = Discretization::new(&m).unwrap();
    let g = d.solve_green(&m, Vec2::new(0.37, 0.52)).unwrap();
    let flux = d.green_flux(&m, &g).unwrap();
    assert_relative_eq!(flux.integral(&m), -1.0, epsilon = 1e-8);
}

#[test]
fn green_rejects_source_near_boundary() {
    let m = disk_mesh(0.1);
    assert!(matches!(
        solve_green(&m, Vec2::new(0.95, 0.0)),
        Err(Error::InvalidPoint(_))
    ));
    assert!(matches!(
        solve_green(&m, Vec2::new(3.0, 0.0)),
        Err(Error::InvalidPoint(_))
    ));
}

#[test]
fn torsion_flux_identity_and_disk_values() {
    let m = disk_mesh(0.05);
    let d = Discretization::new(&m).unwrap();
    let u = d.solve_torsion().unwrap();
    let flux = d.boundary_flux(&m, &u, Source::torsion()).unwrap();
    assert_relative_eq!(flux.integral(&m), -m.area(), epsilon = 1e-10);
    for v in &flux.values {
        assert_relative_eq!(*v, -0.5, max_relative = 1e-2);
    }
}

#[test]
fn eigenfunction_flux_on_disk() {
    let m = disk_mesh(0.05);
    let d = Discretization::new(&m).unwrap();
    let e = d.solve_eigenpair().unwrap();
    let flux = d
        .boundary_flux(&m, &e.phi, Source::eigenfunction(e.lambda1))
        .unwrap();
    let exact = -J01 / std::f64::consts::PI.sqrt();
    for v in &flux.values {
        assert_relative_eq!(*v, exact, max_relative = 1e-2);
    }
}

#[test]
fn field_mesh_mismatch_rejected() {
    let a = mesh_of(&DomainSpec::unit_square(), 0.2);
    let b = a.refine();
    let u = solve_torsion(&a).unwrap();
    assert!(matches!(
        boundary_flux(&b, &u, Source::torsion()),
        Err(Error::MeshMismatch)
    ));
}

#[test]
fn scale_equivariance() {
    let m = mesh_of(&DomainSpec::EquilateralTriangle { side: 1.0 }, 0.05);
    let t = 3.0;
    let s = m.scaled(t);
    let u = solve_torsion(&m).unwrap();
    let us = solve_torsion(&s).unwrap();
    for (a, b) in u.values.iter().zip(&us.values) {
        if a.abs() > 0.0 {
            assert_relative_eq!(b / a, t * t, max_relative = 1e-12);
        }
    }
    let l = solve_eigenpair(&m).unwrap().lambda1;
    let ls = solve_eigenpair(&s).unwrap().lambda1;
    assert_relative_eq!(ls * t * t, l, max_relative = 1e-12);
}

#[test]
fn field_text_export() {
    let m = mesh_of(&DomainSpec::unit_square(), 0.3);
    let u = solve_torsion(&m).unwrap();
    let mut buf = Vec::new();
    write_field_text(&u, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), m.num_vertices());
    let mut svg = Vec::new();
    write_field_svg(&m, &u, &mut svg).unwrap();
    assert!(String::from_utf8(svg).unwrap().starts_with("<svg"));
}
