//! The functionals `T`, `M`, `λ₁`, `F = T/(M|Ω|)` and `G = Mλ₁` with Richardson
//! extrapolation over nested meshes, curvature-based bounds and the bound audit.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{Discretization, EigenSolution, ScalarField, Source};
use crate::geometry::{curvature_extrema, geometry_report, Domain, Vec2};
use crate::mesh::{triangulate_with_points, Mesh};
use crate::shape::{locate_max, MaxPoint};

/// `(4 v_fine - v_coarse) / 3`, the second-order Richardson extrapolant.
pub fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

/// Everything solved on one mesh level.
#[derive(Debug, Clone)]
pub struct LevelSolution {
    pub mesh: Mesh,
    pub disc: Discretization,
    pub torsion: ScalarField,
    pub eigen: EigenSolution,
    pub max_point: MaxPoint,
}

impl LevelSolution {
    pub fn solve(mesh: Mesh) -> Result<Self> {
        let disc = Discretization::new(&mesh)?;
        let torsion = disc.solve_torsion()?;
        let eigen = disc.solve_eigenpair()?;
        let max_point = locate_max(&mesh, &torsion)?;
        Ok(Self {
            mesh,
            disc,
            torsion,
            eigen,
            max_point,
        })
    }

    pub fn torsion_integral(&self) -> f64 {
        self.torsion.integral(&self.mesh)
    }

    pub fn lambda(&self) -> f64 {
        self.eigen.lambda1
    }

    pub fn max_torsion(&self) -> f64 {
        self.max_point.value
    }

    pub fn torsion_flux(&self) -> Result<crate::fem::BoundaryField> {
        self.disc
            .boundary_flux(&self.mesh, &self.torsion, Source::torsion())
    }

    pub fn eigen_flux(&self) -> Result<crate::fem::BoundaryField> {
        self.disc.boundary_flux(
            &self.mesh,
            &self.eigen.phi,
            Source::eigenfunction(self.eigen.lambda1),
        )
    }
}

/// Meshes `domain` at `h` (with `extra` points as vertices), refines
/// `levels - 1` times and solves on every level.
pub fn solve_levels(
    domain: &Domain,
    h: f64,
    levels: usize,
    extra: &[Vec2],
) -> Result<Vec<LevelSolution>> {
    if levels < 2 {
        return Err(Error::InvalidParameter(format!(
            "at least 2 mesh levels are needed, got {levels}"
        )));
    }
    let mut mesh = triangulate_with_points(domain, h, extra)?;
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        let next = if level + 1 < levels {
            Some(mesh.refine())
        } else {
            None
        };
        out.push(LevelSolution::solve(mesh)?);
        match next {
            Some(m) => mesh = m,
            None => break,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelRow {
    pub h: f64,
    pub triangles: usize,
    pub torsion: f64,
    pub max_torsion: f64,
    pub lambda1: f64,
    pub f: f64,
    pub g: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FunctionalReport {
    pub label: String,
    pub area: f64,
    pub levels: Vec<LevelRow>,
    pub torsion: f64,
    pub max_torsion: f64,
    pub lambda1: f64,
    pub x0: [f64; 2],
    pub f: f64,
    pub g: f64,
    /// Difference of the last two per-level values.
    pub f_uncertainty: f64,
    pub g_uncertainty: f64,
    pub lambda_uncertainty: f64,
    pub convex: bool,
}

pub fn functional_report(domain: &Domain, h: f64, levels: usize) -> Result<FunctionalReport> {
    let sols = solve_levels(domain, h, levels, &[])?;
    Ok(report_from_levels(domain, &sols))
}

pub fn report_from_levels(domain: &Domain, sols: &[LevelSolution]) -> FunctionalReport {
    let area = domain.area();
    let rows: Vec<LevelRow> = sols
        .iter()
        .map(|s| {
            let t = s.torsion_integral();
            let m = s.max_torsion();
            let l = s.lambda();
            LevelRow {
                h: s.mesh.h,
                triangles: s.mesh.num_triangles(),
                torsion: t,
                max_torsion: m,
                lambda1: l,
                f: t / (m * area),
                g: m * l,
            }
        })
        .collect();
    let n = rows.len();
    let (c, f) = (&rows[n - 2], &rows[n - 1]);
    let torsion = richardson(c.torsion, f.torsion);
    let max_torsion = richardson(c.max_torsion, f.max_torsion);
    let lambda1 = richardson(c.lambda1, f.lambda1);
    let x0 = sols[n - 1].max_point.x0;
    FunctionalReport {
        label: domain.label.clone(),
        area,
        torsion,
        max_torsion,
        lambda1,
        x0: [x0.x, x0.y],
        f: torsion / (max_torsion * area),
        g: max_torsion * lambda1,
        f_uncertainty: (f.f - c.f).abs(),
        g_uncertainty: (f.g - c.g).abs(),
        lambda_uncertainty: (f.lambda1 - c.lambda1).abs(),
        convex: domain.is_convex(),
        levels: rows,
    }
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct CurvatureBounds {
    pub k_min: f64,
    pub k_max: f64,
    pub alpha: f64,
    pub beta: f64,
    pub f_window: [f64; 2],
    pub f_floor: f64,
}

impl CurvatureBounds {
    pub fn from_curvatures(k_min: f64, k_max: f64) -> Self {
        let alpha = (k_min / k_max).powi(3) / 4.0;
        let beta = 2.0 - alpha;
        CurvatureBounds {
            k_min,
            k_max,
            alpha,
            beta,
            f_window: [alpha / (alpha + 1.0), beta / (beta + 1.0)],
            f_floor: alpha,
        }
    }
}

/// Bounds for strictly convex domains with analytic boundary curvature.
pub fn curvature_bounds(domain: &Domain) -> Result<CurvatureBounds> {
    if !domain.is_convex() {
        return Err(Error::NotApplicable(format!(
            "'{}' is not convex",
            domain.label
        )));
    }
    let (k_min, k_max) = curvature_extrema(domain)
        .map_err(|e| Error::NotApplicable(format!("no smooth boundary: {e}")))?;
    if !(k_min > 0.0) {
        return Err(Error::NotApplicable(
            "boundary is not strictly convex".into(),
        ));
    }
    Ok(CurvatureBounds::from_curvatures(k_min, k_max))
}

/// Discrete counterparts of the gradient-bound constants built from the
/// boundary minimum of `k |∇u|³`, with the torsion flux supplying `|∇u|`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GradientBoundDiagnostics {
    pub p_min: f64,
    pub alpha_tilde: f64,
    pub beta_tilde: f64,
}

pub fn gradient_bound_diagnostics(level: &LevelSolution) -> Result<GradientBoundDiagnostics> {
    let flux = level.torsion_flux()?;
    let mut p_min = f64::INFINITY;
    for (e, g) in level.mesh.boundary_edges.iter().zip(&flux.values) {
        let curve = level.mesh.loop_curves[e.loop_id];
        let k = curve
            .curvature_at(level.mesh.edge_midpoint(e))
            .ok_or_else(|| {
                Error::NotApplicable("gradient bounds need analytic boundary curvature".into())
            })?;
        p_min = p_min.min(k * g.abs().powi(3));
    }
    let s = (1.0 - 2.0 * p_min / level.max_torsion()).max(0.0).sqrt();
    Ok(GradientBoundDiagnostics {
        p_min,
        alpha_tilde: 1.0 - s,
        beta_tilde: 1.0 + s,
    })
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Holds,
    Violated,
    NotApplicable,
    ConjectureConsistent,
    ConjectureInconsistent,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub inequality: String,
    /// Positive when the inequality holds.
    pub margin: f64,
    pub status: BoundStatus,
}

/// `G ≤ 3 d ln 2 + 4` at `d = 2`.
pub fn universal_g_upper() -> f64 {
    6.0 * LN_2 + 4.0
}

/// `G ≤ d/4 + (1/4)·√(5(1 + ln2/4))·√d + 1` at `d = 2`.
pub fn semigroup_g_upper() -> f64 {
    let d = 2.0f64;
    d / 4.0 + 0.25 * (5.0 * (1.0 + LN_2 / 4.0)).sqrt() * d.sqrt() + 1.0
}

/// Checks every applicable inequality on the report's values. `tolerance` is
/// the relative discretization allowance applied to each bound.
pub fn bound_audit(domain: &Domain, report: &FunctionalReport, tolerance: f64) -> Vec<BoundCheck> {
    let (f, g) = (report.f, report.g);
    let convex = domain.is_convex();
    let mut out = Vec::new();
    let mut upper = |name: &str, ineq: &str, value: f64, bound: f64, applies: bool| {
        let margin = bound - value;
        out.push(BoundCheck {
            name: name.into(),
            inequality: ineq.into(),
            margin,
            status: if !applies {
                BoundStatus::NotApplicable
            } else if margin >= -tolerance * bound.abs() {
                BoundStatus::Holds
            } else {
                BoundStatus::Violated
            },
        });
    };
    upper("f_at_most_one", "F <= 1", f, 1.0, true);
    upper("f_convex_upper", "F <= 2/3 (convex)", f, 2.0 / 3.0, convex);
    upper(
        "g_log_upper",
        "G <= 6 ln 2 + 4",
        g,
        universal_g_upper(),
        true,
    );
    upper(
        "g_semigroup_upper",
        "G <= 1/2 + sqrt(10 (1 + ln2/4))/4 + 1",
        g,
        semigroup_g_upper(),
        true,
    );
    let bounds = curvature_bounds(domain).ok();
    upper(
        "f_curvature_upper",
        "F <= beta/(beta+1) (C2 strictly convex)",
        f,
        bounds.map_or(2.0 / 3.0, |b| b.f_window[1]),
        bounds.is_some(),
    );
    let mut lower = |name: &str, ineq: &str, value: f64, bound: f64, applies: bool| {
        let margin = value - bound;
        out.push(BoundCheck {
            name: name.into(),
            inequality: ineq.into(),
            margin,
            status: if !applies {
                BoundStatus::NotApplicable
            } else if margin >= -tolerance * bound.abs() {
                BoundStatus::Holds
            } else {
                BoundStatus::Violated
            },
        });
    };
    lower("g_at_least_one", "G >= 1", g, 1.0, true);
    lower("f_convex_lower", "F >= 1/9 (convex)", f, 1.0 / 9.0, convex);
    lower(
        "g_convex_lower",
        "G >= pi^2/8 (convex)",
        g,
        PI * PI / 8.0,
        convex,
    );
    lower(
        "f_curvature_lower",
        "F >= alpha (C2 strictly convex)",
        f,
        bounds.map_or(0.0, |b| b.f_floor),
        bounds.is_some(),
    );
    let margin = f - 1.0 / 3.0;
    out.push(BoundCheck {
        name: "f_conjectured_lower".into(),
        inequality: "F >= 1/3 (convex, conjecture)".into(),
        margin,
        status: if !convex {
            BoundStatus::NotApplicable
        } else if margin >= -tolerance / 3.0 {
            BoundStatus::ConjectureConsistent
        } else {
            BoundStatus::ConjectureInconsistent
        },
    });
    out
}

/// True when no applicable bound is violated (conjecture rows never fail).
pub fn audit_passes(checks: &[BoundCheck]) -> bool {
    checks.iter().all(|c| c.status != BoundStatus::Violated)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PFunctionCheck {
    /// Largest vertex value of `|∇u|² + 2u`.
    pub max_value: f64,
    /// `max_value / (2M)`.
    pub ratio: f64,
}

/// Discrete P-function `|∇u_h|² + 2u_h` with vertex gradients averaged from
/// the adjacent triangles by area.
pub fn p_function_check(
    domain: &Domain,
    mesh: &Mesh,
    torsion: &ScalarField,
    max_torsion: f64,
) -> Result<PFunctionCheck> {
    if !domain.is_convex() {
        return Err(Error::NotApplicable(
            "the P-function bound is stated for convex domains".into(),
        ));
    }
    if torsion.mesh_id != mesh.id() {
        return Err(Error::MeshMismatch);
    }
    let n = mesh.num_vertices();
    let mut grad = vec![Vec2::zeros(); n];
    let mut weight = vec![0.0; n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.triangle_points(t);
        let area = mesh.triangle_area(t);
        let mut g = Vec2::zeros();
        for k in 0..3 {
            let e = p[(k + 2) % 3] - p[(k + 1) % 3];
            g += Vec2::new(-e.y, e.x) * torsion.values[tri[k]];
        }
        g /= 2.0 * area;
        for &v in tri {
            grad[v] += g * area;
            weight[v] += area;
        }
    }
    let mut max_value = f64::NEG_INFINITY;
    for i in 0..n {
        let g = grad[i] / weight[i];
        max_value = max_value.max(g.norm_squared() + 2.0 * torsion.values[i]);
    }
    Ok(PFunctionCheck {
        max_value,
        ratio: max_value / (2.0 * max_torsion),
    })
}

/// Geometry summary used by reports.
pub fn area_of(domain: &Domain) -> f64 {
    geometry_report(domain).area
}
