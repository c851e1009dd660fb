use std::path::Path;

use serde_json::json;
use torsionlab::experiments::{
    run_cluster_study, run_homogenized_study, run_league_table, run_perforated_study,
    run_rectangle_study, run_triangle_criticality, HomogenizedConfig, Provenance, Resolution,
    StudyRow, StudyTable,
};
use torsionlab::fem::BoundaryField;
use torsionlab::functionals::{bound_audit, functional_report, BoundStatus};
use torsionlab::geometry::{
    build_domain, is_convex_polygon, signed_area, Domain, DomainSpec, Vec2,
};
use torsionlab::mesh::{triangulate, Mesh};
use torsionlab::optimizer::{maximize_g, OptimConfig, OptimStatus};
use torsionlab::plot::{boundary_svg, heatmap_svg};
use torsionlab::shape::{optimality_residual, shape_derivative, topological_field, ShapeVelocity};

use crate::config::RunConfig;
use crate::domain::{parse_domain, parse_seed};
use crate::{CliError, MeshArgs, StudyArgs, StudyKind};

type Extra = Box<dyn FnOnce(&Path) -> Result<(), CliError>>;

/// A table plus any command-specific files written next to it.
pub struct Output {
    pub table: StudyTable,
    pub extra: Option<Extra>,
}

impl From<StudyTable> for Output {
    fn from(table: StudyTable) -> Self {
        Output { table, extra: None }
    }
}

const DEFAULT_H: f64 = 0.05;
const DEFAULT_LEVELS: usize = 2;

struct Resolved {
    label: String,
    domain: Domain,
    h: f64,
    levels: usize,
}

fn resolve(cfg: &RunConfig, m: &MeshArgs) -> Result<Resolved, CliError> {
    let label = m
        .domain
        .clone()
        .or_else(|| cfg.domain.clone())
        .ok_or_else(|| CliError::Input("no domain given (--domain or config)".into()))?;
    let domain = build_domain(&parse_domain(&label)?)?;
    let h = m.h.or(cfg.h).unwrap_or(DEFAULT_H);
    let levels = m.levels.or(cfg.levels).unwrap_or(DEFAULT_LEVELS);
    check_resolution(h, levels)?;
    Ok(Resolved {
        label,
        domain,
        h,
        levels,
    })
}

fn check_resolution(h: f64, levels: usize) -> Result<(), CliError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(CliError::Input(format!("h = {h} must be positive")));
    }
    if levels < 2 {
        return Err(CliError::Input(format!(
            "levels = {levels} (need at least 2)"
        )));
    }
    Ok(())
}

pub fn report(cfg: &RunConfig, m: &MeshArgs) -> Result<Output, CliError> {
    let r = resolve(cfg, m)?;
    let rep = functional_report(&r.domain, r.h, r.levels)?;
    let mut t = StudyTable::new("report");
    for lvl in &rep.levels {
        let p = format!("h={}", lvl.h);
        for (q, v) in [
            ("T", lvl.torsion),
            ("M", lvl.max_torsion),
            ("lambda1", lvl.lambda1),
            ("F", lvl.f),
            ("G", lvl.g),
        ] {
            t.rows.push(StudyRow::info(&p, q, v, Provenance::Derived));
        }
    }
    for (q, v) in [
        ("T", rep.torsion),
        ("M", rep.max_torsion),
        ("lambda1", rep.lambda1),
        ("F", rep.f),
        ("G", rep.g),
        ("area", rep.area),
        ("F_uncertainty", rep.f_uncertainty),
        ("G_uncertainty", rep.g_uncertainty),
    ] {
        t.rows
            .push(StudyRow::info("extrapolated", q, v, Provenance::Derived));
        t.values.insert(q.into(), v);
    }
    t.plot.title = format!("{} per mesh level", r.label);
    t.plot.x_label = "h".into();
    t.plot.series = vec![
        ("G".into(), rep.levels.iter().map(|l| (l.h, l.g)).collect()),
        ("F".into(), rep.levels.iter().map(|l| (l.h, l.f)).collect()),
    ];
    t.plot.reference_lines = vec![("G extrapolated".into(), rep.g)];
    t.details = json!({ "domain": r.label, "h": r.h, "levels": r.levels, "report": rep });
    Ok(t.into())
}

pub fn audit(cfg: &RunConfig, m: &MeshArgs) -> Result<Output, CliError> {
    let r = resolve(cfg, m)?;
    let rep = functional_report(&r.domain, r.h, r.levels)?;
    let checks = bound_audit(&r.domain, &rep, cfg.tolerances.audit);
    let mut t = StudyTable::new("audit");
    for c in &checks {
        let row = match c.status {
            BoundStatus::Holds | BoundStatus::Violated => StudyRow::flag(
                &c.name,
                "holds",
                c.status == BoundStatus::Holds,
                Provenance::Published,
            ),
            other => StudyRow::info(&c.name, "margin", c.margin, Provenance::Published)
                .with_note(format!("{other:?}")),
        };
        t.rows
            .push(row.with_note(format!("{}; margin {:.6e}", c.inequality, c.margin)));
    }
    t.values.insert("F".into(), rep.f);
    t.values.insert("G".into(), rep.g);
    t.plot.title = format!("Bound margins on {}", r.label);
    t.plot.x_label = "check".into();
    t.plot.series = vec![(
        "margin".into(),
        checks
            .iter()
            .enumerate()
            .map(|(i, c)| (i as f64, c.margin))
            .collect(),
    )];
    t.plot.reference_lines = vec![("0".into(), 0.0)];
    t.details = json!({ "domain": r.label, "tolerance": cfg.tolerances.audit, "report": rep, "checks": checks });
    Ok(t.into())
}

pub fn residual(cfg: &RunConfig, m: &MeshArgs) -> Result<Output, CliError> {
    let r = resolve(cfg, m)?;
    let (mesh, rep) = optimality_residual(&r.domain, r.h)?;
    let mut t = StudyTable::new("residual");
    let p = r.label.as_str();
    t.rows.push(StudyRow::info(
        p,
        "normalized_sup",
        rep.normalized_sup,
        Provenance::Derived,
    ));
    t.rows.push(StudyRow::info(
        p,
        "mean_ratio",
        rep.mean_ratio,
        Provenance::Derived,
    ));
    t.rows.push(
        StudyRow::info(p, "dilation_ratio", rep.dilation_ratio, Provenance::Derived)
            .with_note("vanishes on every domain"),
    );
    t.rows.push(StudyRow::absolute(
        p,
        "green_flux_total",
        rep.green_flux_total,
        -1.0,
        cfg.tolerances.green_flux,
        Provenance::Trivial,
    ));
    for (q, v) in [
        ("normalized_sup", rep.normalized_sup),
        ("mean_ratio", rep.mean_ratio),
        ("dilation_ratio", rep.dilation_ratio),
        ("green_flux_total", rep.green_flux_total),
    ] {
        t.values.insert(q.into(), v);
    }
    let scale = rep.max_torsion * rep.lambda1 / rep.perimeter;
    let arcs = rep.residual.arc_positions(&mesh);
    let mut pts: Vec<(f64, f64)> = arcs
        .iter()
        .zip(&rep.residual.values)
        .map(|(s, v)| (*s, v / scale))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    t.plot.title = format!("Optimality residual on {}", r.label);
    t.plot.x_label = "arc length".into();
    t.plot.series = vec![("rho / (G / perimeter)".into(), pts)];
    t.plot.reference_lines = vec![("0".into(), 0.0)];
    t.details = json!({ "domain": r.label, "h": r.h, "report": rep });
    let edges = edge_table(&mesh, &rep.residual);
    let svg = boundary_svg(&mesh, &rep.residual.values);
    Ok(Output {
        table: t,
        extra: Some(Box::new(move |dir| {
            std::fs::write(dir.join("edges.csv"), edges)?;
            std::fs::write(dir.join("boundary.svg"), svg)?;
            Ok(())
        })),
    })
}

fn edge_table(mesh: &Mesh, field: &BoundaryField) -> String {
    use torsionlab::output::{csv_line, fmt_f64};
    let mut out = csv_line(&["loop", "x", "y", "length", "value"].map(String::from));
    out.push('\n');
    for (e, v) in mesh.boundary_edges.iter().zip(&field.values) {
        let c = mesh.edge_midpoint(e);
        out.push_str(&csv_line(&[
            e.loop_id.to_string(),
            fmt_f64(c.x),
            fmt_f64(c.y),
            fmt_f64(mesh.edge_length(e)),
            fmt_f64(*v),
        ]));
        out.push('\n');
    }
    out
}

pub fn derivative(cfg: &RunConfig, m: &MeshArgs, field: &str) -> Result<Output, CliError> {
    let r = resolve(cfg, m)?;
    let v = ShapeVelocity::by_name(field)
        .ok_or_else(|| CliError::Input(format!("unknown velocity field '{field}'")))?;
    let rep = shape_derivative(&r.domain, &v, r.h, r.levels)?;
    let mut t = StudyTable::new("derivative");
    let p = format!("{}:{field}", r.label);
    t.rows.push(StudyRow::info(
        &p,
        "G_prime",
        rep.g_prime,
        Provenance::Derived,
    ));
    t.rows.push(StudyRow::info(
        &p,
        "G_prime_over_G",
        rep.g_prime / rep.g,
        Provenance::Derived,
    ));
    t.rows.push(StudyRow::info(
        &p,
        "lambda_times_M_prime",
        rep.lambda_times_m_prime,
        Provenance::Derived,
    ));
    t.rows.push(StudyRow::info(
        &p,
        "M_times_lambda_prime",
        rep.m_times_lambda_prime,
        Provenance::Derived,
    ));
    t.rows.push(StudyRow::absolute(
        &p,
        "decomposition",
        rep.g_prime,
        rep.lambda_times_m_prime + rep.m_times_lambda_prime,
        1e-9 * rep.g,
        Provenance::Trivial,
    ));
    if rep.extended_beyond_hypotheses {
        t.rows.push(
            StudyRow::info(&p, "non_convex", 1.0, Provenance::Published)
                .with_note("derivative formula used outside the convex class"),
        );
    }
    t.values.insert("G_prime".into(), rep.g_prime);
    t.values.insert("G".into(), rep.g);
    t.plot.title = format!("G' along {field} on {}", r.label);
    t.plot.x_label = "h".into();
    t.plot.series = vec![(
        "G'".into(),
        rep.levels.iter().map(|l| (l.h, l.g_prime)).collect(),
    )];
    t.plot.reference_lines = vec![("0".into(), 0.0)];
    t.details = json!({ "domain": r.label, "field": field, "report": rep });
    Ok(t.into())
}

fn parse_point(s: &str) -> Result<Vec2, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Input(format!("point '{s}' is not x,y")))?;
    if v.len() != 2 {
        return Err(CliError::Input(format!("point '{s}' is not x,y")));
    }
    Ok(Vec2::new(v[0], v[1]))
}

pub fn topo(cfg: &RunConfig, m: &MeshArgs, points: &[String]) -> Result<Output, CliError> {
    let r = resolve(cfg, m)?;
    if points.is_empty() {
        return Err(CliError::Input("at least one --point x,y is needed".into()));
    }
    let pts: Vec<Vec2> = points
        .iter()
        .map(|p| parse_point(p))
        .collect::<Result<_, _>>()?;
    let values = topological_field(&r.domain, &pts, r.h, r.levels)?;
    let mut t = StudyTable::new("topo");
    for v in &values {
        let p = format!("({}, {})", v.point[0], v.point[1]);
        t.rows
            .push(StudyRow::info(&p, "R", v.value, Provenance::Derived));
        t.rows.push(StudyRow::info(
            &p,
            "R_positive",
            if v.value > 0.0 { 1.0 } else { 0.0 },
            Provenance::Derived,
        ));
    }
    t.plot.title = format!("Topological field on {}", r.label);
    t.plot.x_label = "point".into();
    t.plot.series = vec![(
        "R".into(),
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (i as f64, v.value))
            .collect(),
    )];
    t.plot.reference_lines = vec![("0".into(), 0.0)];
    t.details = json!({ "domain": r.label, "h": r.h, "levels": r.levels, "values": values });
    Ok(t.into())
}

fn study_resolution(
    cfg: &RunConfig,
    a: &StudyArgs,
    h: f64,
    levels: usize,
) -> Result<Resolution, CliError> {
    let res = Resolution::new(
        a.h.or(cfg.h).unwrap_or(h),
        a.levels.or(cfg.levels).unwrap_or(levels),
    );
    check_resolution(res.h, res.levels)?;
    Ok(res)
}

pub fn study(cfg: &RunConfig, kind: StudyKind) -> Result<Output, CliError> {
    let s = &cfg.study;
    let table = match kind {
        StudyKind::Rectangle(a) => {
            run_rectangle_study(&s.rectangle_n, study_resolution(cfg, &a, 0.1, 2)?)?
        }
        StudyKind::Cluster(a) => run_cluster_study(
            &s.cluster_n,
            s.cluster_segments,
            study_resolution(cfg, &a, 0.1, 2)?,
        )?,
        StudyKind::Homog(a) => {
            let defaults = HomogenizedConfig::default();
            let hc = HomogenizedConfig {
                base: parse_domain(&s.homog_base)?,
                a_list: s.homog_a.clone(),
                resolution: study_resolution(
                    cfg,
                    &a,
                    defaults.resolution.h,
                    defaults.resolution.levels,
                )?,
                eigen_resolution: Resolution::new(s.homog_eigen_h, 2),
                ..defaults
            };
            run_homogenized_study(&hc)?
        }
        StudyKind::Perforated(a) => run_perforated_study(
            &DomainSpec::unit_square(),
            &s.perforated_eps,
            s.perforated_c0,
            study_resolution(cfg, &a, 0.01, 2)?,
        )?,
        StudyKind::TriangleCrit => run_triangle_criticality()?,
        StudyKind::League(a) => {
            let entries: Vec<(String, DomainSpec)> = s
                .league
                .iter()
                .map(|l| Ok((l.clone(), parse_domain(l)?)))
                .collect::<Result<_, CliError>>()?;
            run_league_table(&entries, study_resolution(cfg, &a, 0.05, 3)?)?
        }
    };
    Ok(table.into())
}

pub fn optimize(
    cfg: &RunConfig,
    seed: Option<String>,
    max_iters: Option<usize>,
    h: Option<f64>,
    levels: Option<usize>,
) -> Result<Output, CliError> {
    let o = &cfg.optimize;
    let seed_text = seed.unwrap_or_else(|| o.seed.clone());
    let seed_poly = parse_seed(&seed_text)?;
    let oc = OptimConfig {
        h: h.or(cfg.h).unwrap_or(DEFAULT_H),
        levels: levels.or(cfg.levels).unwrap_or(DEFAULT_LEVELS),
        max_iters: max_iters.unwrap_or(o.max_iters),
        initial_move: o.initial_move,
        seed: o.rng_seed,
        fd_probes: o.fd_probes,
        ..OptimConfig::default()
    };
    check_resolution(oc.h, oc.levels)?;
    let trace = maximize_g(&seed_poly, &oc)?;
    let mut t = StudyTable::new("optimize");
    let p = seed_text.as_str();
    t.rows.push(StudyRow::flag(
        p,
        "monotone_ascent",
        trace.is_monotone(),
        Provenance::Trivial,
    ));
    let shapes_ok = trace.iterates.iter().all(|it| {
        let v: Vec<Vec2> = it.vertices.iter().map(|q| Vec2::new(q[0], q[1])).collect();
        is_convex_polygon(&v) && (signed_area(&v) - 1.0).abs() < 1e-9
    });
    t.rows.push(StudyRow::flag(
        p,
        "convex_unit_area",
        shapes_ok,
        Provenance::Trivial,
    ));
    t.rows.push(StudyRow::flag(
        p,
        "gradient_probes",
        trace.probes_pass(),
        Provenance::Derived,
    ));
    t.rows.push(StudyRow::info(
        p,
        "accepted_steps",
        trace.accepted_steps() as f64,
        Provenance::Derived,
    ));
    t.rows.push(
        StudyRow::info(p, "best_G", trace.best_g, Provenance::Derived)
            .with_note(format!("status {:?}", trace.status)),
    );
    t.values.insert("best_G".into(), trace.best_g);
    t.values.insert("seed_G".into(), trace.iterates[0].g);
    t.values.insert(
        "converged".into(),
        if trace.status == OptimStatus::Converged {
            1.0
        } else {
            0.0
        },
    );
    t.plot.title = format!("G along the ascent from {seed_text}");
    t.plot.x_label = "iteration".into();
    t.plot.series = vec![(
        "G".into(),
        trace
            .iterates
            .iter()
            .enumerate()
            .map(|(i, it)| (i as f64, it.g))
            .collect(),
    )];
    t.plot.reference_lines = vec![
        (
            "4 pi^2/27".into(),
            4.0 * std::f64::consts::PI.powi(2) / 27.0,
        ),
        ("disk".into(), 1.4457964907366961),
    ];
    t.details = json!({ "config": oc, "status": trace.status, "diagnostics": trace.diagnostics });
    Ok(Output {
        table: t,
        extra: Some(Box::new(move |dir| {
            trace.write(dir)?;
            Ok(())
        })),
    })
}

pub fn mesh_export(
    cfg: &RunConfig,
    domain: Option<String>,
    h: Option<f64>,
) -> Result<Output, CliError> {
    let r = resolve(
        cfg,
        &MeshArgs {
            domain,
            h,
            levels: Some(2),
        },
    )?;
    let mesh = triangulate(&r.domain, r.h)?;
    let mut t = StudyTable::new("mesh");
    let p = r.label.as_str();
    for (q, v) in [
        ("vertices", mesh.num_vertices() as f64),
        ("triangles", mesh.num_triangles() as f64),
        ("max_edge", mesh.h),
        ("min_angle_deg", mesh.min_angle_deg()),
        ("area", mesh.area()),
    ] {
        t.rows.push(StudyRow::info(p, q, v, Provenance::Trivial));
        t.values.insert(q.into(), v);
    }
    t.rows.push(StudyRow::at_most(
        p,
        "max_edge_within_target",
        mesh.h,
        r.h,
        0.0,
        Provenance::Trivial,
    ));
    t.plot.title = format!("Mesh of {}", r.label);
    t.plot.x_label = "".into();
    t.details = json!({ "domain": r.label, "h_target": r.h });
    let mut text = Vec::new();
    mesh.write_text(&mut text)?;
    let svg = heatmap_svg(&mesh, &vec![0.0; mesh.num_vertices()]);
    Ok(Output {
        table: t,
        extra: Some(Box::new(move |dir| {
            std::fs::write(dir.join("mesh.txt"), text)?;
            std::fs::write(dir.join("mesh.svg"), svg)?;
            Ok(())
        })),
    })
}
