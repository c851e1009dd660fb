use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{decreasing, increasing, Provenance, Resolution, StudyRow, StudyTable};
use crate::error::{Error, Result};
use crate::fem::Discretization;
use crate::functionals::{functional_report, richardson};
use crate::geometry::{build_domain, DomainSpec};
use crate::mesh::{triangulate, Mesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedConfig {
    pub base: DomainSpec,
    /// Screening constants, increasing.
    pub a_list: Vec<f64>,
    /// Mesh hierarchy for the screened solves; the finest level must resolve
    /// the boundary layer of the largest `a`.
    pub resolution: Resolution,
    /// Hierarchy for `λ₁` of the base domain.
    pub eigen_resolution: Resolution,
    pub max_tolerance: f64,
    pub g_tolerance: f64,
    /// Lower bound asserted for `F̂` once `a` reaches `f_hat_from_a`.
    pub f_hat_floor: f64,
    pub f_hat_from_a: f64,
}

impl Default for HomogenizedConfig {
    fn default() -> Self {
        HomogenizedConfig {
            base: DomainSpec::unit_square(),
            a_list: vec![1e2, 1e3, 1e4],
            resolution: Resolution::new(0.005, 2),
            eigen_resolution: Resolution::new(0.05, 2),
            max_tolerance: 1e-6,
            g_tolerance: 1e-3,
            f_hat_floor: 0.95,
            f_hat_from_a: 1e4,
        }
    }
}

/// Finest edge length that resolves the layer of width `1/√a`.
pub fn required_h(a: f64) -> f64 {
    0.25 / a.sqrt()
}

#[derive(Debug, Clone, Serialize)]
struct ScreenedRow {
    a: f64,
    integral: f64,
    max_value: f64,
    f_hat: f64,
    g_hat: f64,
    integral_per_level: Vec<f64>,
}

/// Screened torsion `−Δu + a u = 1` on a fixed domain: as `a` grows the
/// normalized profile `a u` flattens to 1 and `F̂ → 1`, `Ĝ → 1`.
pub fn run_homogenized_study(cfg: &HomogenizedConfig) -> Result<StudyTable> {
    if !cfg.a_list.iter().all(|a| *a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(
            "screening constants must be positive".into(),
        ));
    }
    if !increasing(&cfg.a_list) {
        return Err(Error::InvalidParameter("a_list must be increasing".into()));
    }
    let a_max = cfg.a_list.last().copied().unwrap_or(0.0);
    let finest = cfg.resolution.finest_h();
    if finest > required_h(a_max) {
        return Err(Error::InvalidParameter(format!(
            "finest mesh h = {finest} does not resolve the boundary layer at a = {a_max}; need h <= {:.6}",
            required_h(a_max)
        )));
    }
    if cfg.resolution.levels < 2 {
        return Err(Error::InvalidParameter(
            "at least 2 mesh levels are needed".into(),
        ));
    }
    let domain = build_domain(&cfg.base)?;
    let area = domain.area();
    let lambda_base =
        functional_report(&domain, cfg.eigen_resolution.h, cfg.eigen_resolution.levels)?.lambda1;

    let mut meshes: Vec<Mesh> = vec![triangulate(&domain, cfg.resolution.h)?];
    while meshes.len() < cfg.resolution.levels {
        let next = meshes.last().expect("non-empty").refine();
        meshes.push(next);
    }
    let discs: Vec<Discretization> = meshes
        .iter()
        .map(Discretization::new)
        .collect::<Result<_>>()?;

    let rows: Vec<ScreenedRow> = cfg
        .a_list
        .par_iter()
        .map(|&a| {
            let mut integrals = Vec::with_capacity(meshes.len());
            let mut max_value = 0.0;
            for (mesh, disc) in meshes.iter().zip(&discs) {
                let u = disc.solve_screened(a)?;
                integrals.push(u.integral(mesh));
                // piecewise linear, so the nodal maximum is the maximum
                max_value = u.max();
            }
            let n = integrals.len();
            let integral = richardson(integrals[n - 2], integrals[n - 1]);
            Ok(ScreenedRow {
                a,
                integral,
                max_value,
                f_hat: integral / (max_value * area),
                g_hat: (lambda_base + a) * max_value,
                integral_per_level: integrals,
            })
        })
        .collect::<Result<_>>()?;

    let mut t = StudyTable::new("homogenized");
    for r in &rows {
        let p = r.a;
        t.rows.push(StudyRow::at_most(
            p,
            "max_a_u",
            r.a * r.max_value,
            1.0,
            cfg.max_tolerance,
            Provenance::Published,
        ));
        t.rows.push(StudyRow::at_most(
            p,
            "G_hat",
            r.g_hat,
            1.0 + lambda_base / r.a,
            cfg.g_tolerance,
            Provenance::Published,
        ));
        if r.a >= cfg.f_hat_from_a {
            t.rows.push(StudyRow::at_least(
                p,
                "F_hat",
                r.f_hat,
                cfg.f_hat_floor,
                0.0,
                Provenance::Derived,
            ));
        } else {
            t.rows
                .push(StudyRow::info(p, "F_hat", r.f_hat, Provenance::Derived));
        }
        t.values.insert(format!("F_hat_{}", p), r.f_hat);
        t.values.insert(format!("G_hat_{}", p), r.g_hat);
    }
    let f: Vec<f64> = rows.iter().map(|r| r.f_hat).collect();
    let g: Vec<f64> = rows.iter().map(|r| r.g_hat).collect();
    if rows.len() > 1 {
        t.rows.push(StudyRow::flag(
            "all",
            "F_hat_increasing",
            increasing(&f),
            Provenance::Published,
        ));
        t.rows.push(StudyRow::flag(
            "all",
            "G_hat_decreasing",
            decreasing(&g),
            Provenance::Derived,
        ));
    }
    t.values.insert("lambda1_base".into(), lambda_base);
    t.details = json!({
        "config": cfg,
        "area": area,
        "finest_h": meshes.last().map(|m| m.h),
        "rows": rows,
    });
    t.plot.title = "Screened torsion".into();
    t.plot.x_label = "log10 a".into();
    t.plot.series = vec![
        (
            "F_hat".into(),
            rows.iter().map(|r| (r.a.log10(), r.f_hat)).collect(),
        ),
        (
            "G_hat".into(),
            rows.iter().map(|r| (r.a.log10(), r.g_hat)).collect(),
        ),
    ];
    t.plot.reference_lines = vec![("1".into(), 1.0)];
    Ok(t)
}
