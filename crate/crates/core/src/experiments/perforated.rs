use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{Provenance, Resolution, StudyRow, StudyTable};
use crate::error::{Error, Result};
use crate::fem::Discretization;
use crate::functionals::{functional_report, FunctionalReport};
use crate::geometry::{build_domain, Domain, DomainSpec, PerforationParams, Vec2};
use crate::mesh::triangulate;

/// Lattice sites `ε(2i + 1, 2j + 1)` whose hole of radius `r` fits strictly
/// inside `base`, by scanning every site of the bounding box.
pub fn lattice_hole_count(base: &Domain, epsilon: f64, r: f64) -> usize {
    let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
    for p in base.vertices() {
        lo = lo.inf(&p);
        hi = hi.sup(&p);
    }
    let range = |a: f64, b: f64| {
        let first = (a / (2.0 * epsilon)).floor() as i64 - 2;
        let last = (b / (2.0 * epsilon)).ceil() as i64 + 2;
        first..=last
    };
    let mut count = 0;
    for j in range(lo.y, hi.y) {
        for i in range(lo.x, hi.x) {
            let c = Vec2::new(epsilon * (2 * i + 1) as f64, epsilon * (2 * j + 1) as f64);
            if base.contains(c) && base.boundary_distance(c) > 2.0 * r {
                count += 1;
            }
        }
    }
    count
}

#[derive(Debug, Clone, Serialize)]
struct PerforatedRow {
    epsilon: f64,
    params: PerforationParams,
    holes: usize,
    expected_holes: usize,
    report: FunctionalReport,
}

/// Direct meshes of periodically perforated domains. Only moderate `ε` are
/// meshable, so the table is a qualitative trend next to the screened limit
/// at `a = π/(2 C₀)`.
pub fn run_perforated_study(
    base: &DomainSpec,
    eps_list: &[f64],
    c0: f64,
    res: Resolution,
) -> Result<StudyTable> {
    if eps_list.is_empty() {
        return Err(Error::InvalidParameter("empty epsilon list".into()));
    }
    let base_domain = build_domain(base)?;
    let base_report = functional_report(&base_domain, res.h, res.levels)?;
    let params: Vec<PerforationParams> = eps_list
        .iter()
        .map(|&e| PerforationParams::new(e, c0))
        .collect::<Result<_>>()?;
    let a = params[0].a;

    // homogenized targets on the base at the same resolution
    let mesh = triangulate(&base_domain, res.finest_h())?;
    let u_star = Discretization::new(&mesh)?.solve_screened(a)?;
    let target_integral = u_star.integral(&mesh);
    let target_max = u_star.max();
    let target_f = target_integral / (target_max * base_domain.area());
    let target_g = (base_report.lambda1 + a) * target_max;

    let rows: Vec<PerforatedRow> = params
        .par_iter()
        .map(|p| {
            let spec = DomainSpec::Perforated {
                base: Box::new(base.clone()),
                params: *p,
            };
            let domain = build_domain(&spec)?;
            let report = functional_report(&domain, res.h, res.levels)?;
            Ok(PerforatedRow {
                epsilon: p.epsilon,
                params: *p,
                holes: domain.hole_count(),
                expected_holes: lattice_hole_count(&base_domain, p.epsilon, p.r_eps),
                report,
            })
        })
        .collect::<Result<_>>()?;

    let mut t = StudyTable::new("perforated");
    t.rows.push(StudyRow::relative(
        "all",
        "a",
        a,
        PI / (2.0 * c0),
        1e-12,
        Provenance::Published,
    ));
    for r in &rows {
        let p = r.epsilon;
        t.rows.push(StudyRow::absolute(
            p,
            "holes",
            r.holes as f64,
            r.expected_holes as f64,
            0.0,
            Provenance::Derived,
        ));
        t.rows.push(StudyRow::relative(
            p,
            "r_eps",
            r.params.r_eps,
            (-c0 / (p * p)).exp(),
            1e-12,
            Provenance::Derived,
        ));
        t.rows.push(
            StudyRow::at_most(
                p,
                "M",
                r.report.max_torsion,
                base_report.max_torsion,
                0.0,
                Provenance::Trivial,
            )
            .with_note("domain monotonicity"),
        );
        t.rows.push(StudyRow::info(
            p,
            "T",
            r.report.torsion,
            Provenance::Derived,
        ));
        t.rows.push(StudyRow::info(
            p,
            "area",
            r.report.area,
            Provenance::Derived,
        ));
        t.rows.push(
            StudyRow::info(p, "F", r.report.f, Provenance::Derived)
                .with_note(format!("homogenized target {target_f:.6}")),
        );
        t.rows.push(
            StudyRow::info(p, "G", r.report.g, Provenance::Derived)
                .with_note(format!("homogenized target {target_g:.6}")),
        );
        t.values.insert(format!("F_{p}"), r.report.f);
        t.values.insert(format!("G_{p}"), r.report.g);
    }
    t.values.insert("a".into(), a);
    t.values.insert("F_base".into(), base_report.f);
    t.values.insert("F_homogenized".into(), target_f);
    t.values.insert("G_homogenized".into(), target_g);
    t.values.insert("T_homogenized".into(), target_integral);
    t.values.insert("M_homogenized".into(), target_max);
    t.details = json!({
        "resolution": res,
        "c0": c0,
        "base": base_report,
        "rows": rows,
    });
    t.plot.title = "Perforated domains".into();
    t.plot.x_label = "1/epsilon".into();
    t.plot.series = vec![
        (
            "F".into(),
            rows.iter().map(|r| (1.0 / r.epsilon, r.report.f)).collect(),
        ),
        (
            "G".into(),
            rows.iter().map(|r| (1.0 / r.epsilon, r.report.g)).collect(),
        ),
    ];
    t.plot.reference_lines = vec![
        ("F homogenized".into(), target_f),
        ("G homogenized".into(), target_g),
        ("F base".into(), base_report.f),
    ];
    Ok(t)
}
