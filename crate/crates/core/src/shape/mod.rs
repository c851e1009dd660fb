//! Maximum point of the torsion function, the boundary optimality residual,
//! the shape derivative of `G` and the topological field `R`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{BoundaryField, GreenSolution, ScalarField};
use crate::functionals::{richardson, solve_levels, LevelSolution};
use crate::geometry::{Domain, Vec2};
use crate::mesh::{triangulate, Mesh};

mod fd;

pub use fd::{central_difference_remeshed, central_differences_mapped, observed_orders, FdPoint};

#[derive(Debug, Clone)]
pub struct MaxPoint {
    pub x0: Vec2,
    /// Nodal maximum corrected by the rise of the fitted quadratic to `x0`.
    pub value: f64,
    /// Hessian of the fitted quadratic.
    pub hessian: Matrix2<f64>,
    /// Vertex holding the largest nodal value.
    pub vertex: usize,
    /// Every strict interior local maximum of the nodal values.
    pub local_maxima: Vec<Vec2>,
    pub unique: bool,
}

/// Largest vertex value refined by a least-squares quadratic over the vertex's
/// two-ring and one Newton step on that quadratic, clamped to the patch.
pub fn locate_max(mesh: &Mesh, torsion: &ScalarField) -> Result<MaxPoint> {
    if torsion.mesh_id != mesh.id() {
        return Err(Error::MeshMismatch);
    }
    let values = &torsion.values;
    let adj = mesh.vertex_neighbors();
    let vertex = torsion.argmax();
    let local_maxima: Vec<Vec2> = (0..mesh.num_vertices())
        .filter(|&i| mesh.interior_mask[i] && adj[i].iter().all(|&j| values[j] < values[i]))
        .map(|i| mesh.vertices[i])
        .collect();

    let mut patch: Vec<usize> = adj[vertex].clone();
    for &j in &adj[vertex] {
        patch.extend_from_slice(&adj[j]);
    }
    patch.push(vertex);
    patch.sort_unstable();
    patch.dedup();

    let center = mesh.vertices[vertex];
    let radius = patch
        .iter()
        .map(|&j| (mesh.vertices[j] - center).norm())
        .fold(0.0, f64::max);
    let mut a = DMatrix::zeros(patch.len(), 6);
    let mut b = DVector::zeros(patch.len());
    for (r, &j) in patch.iter().enumerate() {
        let d = (mesh.vertices[j] - center) / radius;
        let row = [1.0, d.x, d.y, d.x * d.x, d.x * d.y, d.y * d.y];
        for (c, v) in row.iter().enumerate() {
            a[(r, c)] = *v;
        }
        b[r] = values[j];
    }
    let fallback = MaxPoint {
        x0: center,
        value: values[vertex],
        hessian: Matrix2::zeros(),
        vertex,
        unique: local_maxima.len() <= 1,
        local_maxima: local_maxima.clone(),
    };
    if patch.len() < 6 {
        return Ok(fallback);
    }
    let coef = match a.svd(true, true).solve(&b, 1e-12) {
        Ok(c) => c,
        Err(_) => return Ok(fallback),
    };
    // quadratic in scaled coordinates s = d / radius
    let grad = Vec2::new(coef[1], coef[2]);
    let hess = Matrix2::new(2.0 * coef[3], coef[4], coef[4], 2.0 * coef[5]);
    let q = |s: Vec2| {
        coef[0]
            + coef[1] * s.x
            + coef[2] * s.y
            + coef[3] * s.x * s.x
            + coef[4] * s.x * s.y
            + coef[5] * s.y * s.y
    };
    let negative_definite = hess[(0, 0)] < 0.0 && hess.determinant() > 0.0;
    let mut step = if negative_definite {
        -hess
            .try_inverse()
            .map(|h| h * grad)
            .unwrap_or_else(Vec2::zeros)
    } else {
        Vec2::zeros()
    };
    if step.norm() > 1.0 {
        step /= step.norm();
    }
    let hessian = hess / (radius * radius);
    Ok(MaxPoint {
        x0: center + step * radius,
        // the fit is used as a correction to the nodal value, which is more
        // accurate than the fit's own value at the vertex
        value: values[vertex] + (q(step) - q(Vec2::zeros())).max(0.0),
        hessian,
        vertex,
        unique: local_maxima.len() <= 1,
        local_maxima,
    })
}

/// Velocity field driving a boundary deformation.
#[derive(Clone)]
pub enum ShapeVelocity {
    Analytic {
        name: String,
        field: Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>,
    },
    /// Displacements attached to the vertices of a closed polygon, linearly
    /// interpolated along its edges.
    Polygon {
        vertices: Vec<Vec2>,
        displacements: Vec<Vec2>,
    },
}

impl std::fmt::Debug for ShapeVelocity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ShapeVelocity::Analytic { name, .. } => write!(f, "Analytic({name})"),
            ShapeVelocity::Polygon { vertices, .. } => {
                write!(f, "Polygon({} vertices)", vertices.len())
            }
        }
    }
}

impl ShapeVelocity {
    pub fn analytic(name: &str, field: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static) -> Self {
        ShapeVelocity::Analytic {
            name: name.into(),
            field: Arc::new(field),
        }
    }

    pub fn translation(v: Vec2) -> Self {
        Self::analytic("translation", move |_| v)
    }

    /// `V(x) = x - center`.
    pub fn dilation(center: Vec2) -> Self {
        Self::analytic("dilation", move |p| p - center)
    }

    /// `V(x, y) = (x, -y)`, area preserving to first order.
    pub fn squeeze() -> Self {
        Self::analytic("squeeze", |p| Vec2::new(p.x, -p.y))
    }

    pub fn rotation(center: Vec2) -> Self {
        Self::analytic("rotation", move |p| {
            let d = p - center;
            Vec2::new(-d.y, d.x)
        })
    }

    /// Named fields accepted on the command line.
    pub fn by_name(name: &str) -> Option<Self> {
        Some(match name {
            "translate-x" => Self::translation(Vec2::new(1.0, 0.0)),
            "translate-y" => Self::translation(Vec2::new(0.0, 1.0)),
            "dilate" => Self::dilation(Vec2::zeros()),
            "squeeze" => Self::squeeze(),
            "rotate" => Self::rotation(Vec2::zeros()),
            _ => return None,
        })
    }

    pub fn eval(&self, p: Vec2) -> Vec2 {
        match self {
            ShapeVelocity::Analytic { field, .. } => field(p),
            ShapeVelocity::Polygon {
                vertices,
                displacements,
            } => {
                let n = vertices.len();
                let mut best = (f64::INFINITY, Vec2::zeros());
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    let e = b - a;
                    let t = ((p - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
                    let dist = (a + e * t - p).norm();
                    if dist < best.0 {
                        let v = displacements[i] * (1.0 - t) + displacements[(i + 1) % n] * t;
                        best = (dist, v);
                    }
                }
                best.1
            }
        }
    }
}

/// Boundary data of one level needed by every derivative formula.
#[derive(Debug, Clone)]
pub struct CriticalityLevel {
    pub h: f64,
    pub max_torsion: f64,
    pub lambda1: f64,
    pub x0: Vec2,
    pub torsion_flux: BoundaryField,
    pub eigen_flux: BoundaryField,
    pub green_flux: BoundaryField,
    pub green: GreenSolution,
    /// `λ₁ ∂u/∂n ∂G/∂n - M (∂φ/∂n)²` per boundary edge.
    pub residual: Vec<f64>,
}

impl CriticalityLevel {
    pub fn new(level: &LevelSolution) -> Result<Self> {
        let mesh = &level.mesh;
        let x0 = level.max_point.x0;
        let green = level.disc.solve_green(mesh, x0)?;
        let torsion_flux = level.torsion_flux()?;
        let eigen_flux = level.eigen_flux()?;
        let green_flux = level.disc.green_flux(mesh, &green)?;
        let (m, l) = (level.max_torsion(), level.lambda());
        let residual = (0..mesh.boundary_edges.len())
            .map(|e| {
                l * torsion_flux.values[e] * green_flux.values[e]
                    - m * eigen_flux.values[e] * eigen_flux.values[e]
            })
            .collect();
        Ok(Self {
            h: mesh.h,
            max_torsion: m,
            lambda1: l,
            x0,
            torsion_flux,
            eigen_flux,
            green_flux,
            green,
            residual,
        })
    }

    fn residual_field(&self, mesh: &Mesh) -> BoundaryField {
        BoundaryField {
            mesh_id: mesh.id(),
            values: self.residual.clone(),
            loop_ids: mesh.boundary_edges.iter().map(|e| e.loop_id).collect(),
        }
    }

    /// `(M', λ₁')` for the velocity, by edge-midpoint quadrature.
    pub fn derivatives(&self, mesh: &Mesh, v: &ShapeVelocity) -> (f64, f64) {
        let mut m_prime = 0.0;
        let mut l_prime = 0.0;
        for (k, e) in mesh.boundary_edges.iter().enumerate() {
            let vn = v.eval(mesh.edge_midpoint(e)).dot(&mesh.edge_normal(e)) * mesh.edge_length(e);
            m_prime += self.torsion_flux.values[k] * self.green_flux.values[k] * vn;
            l_prime -= self.eigen_flux.values[k] * self.eigen_flux.values[k] * vn;
        }
        (m_prime, l_prime)
    }

    /// `∮ ρ V·n` by edge-midpoint quadrature.
    pub fn residual_integral(&self, mesh: &Mesh, v: &ShapeVelocity) -> f64 {
        mesh.boundary_edges
            .iter()
            .zip(&self.residual)
            .map(|(e, r)| {
                r * v.eval(mesh.edge_midpoint(e)).dot(&mesh.edge_normal(e)) * mesh.edge_length(e)
            })
            .sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    #[serde(skip)]
    pub residual: BoundaryField,
    pub max_torsion: f64,
    pub lambda1: f64,
    pub x0: [f64; 2],
    pub perimeter: f64,
    /// `sup |ρ| / (M λ₁ / perimeter)`.
    pub normalized_sup: f64,
    /// `∮ ρ ds / (M λ₁)`.
    pub mean_ratio: f64,
    /// `∮ ρ (x - c)·n ds / (M λ₁)` with `c` the area centroid: the derivative
    /// of `G` along a dilation, relative to `G`.
    pub dilation_ratio: f64,
    /// `∮ ∂G/∂n ds`, minus one for a unit source.
    pub green_flux_total: f64,
}

/// Optimality residual on a single mesh of size `h`.
pub fn optimality_residual(domain: &Domain, h: f64) -> Result<(Mesh, ResidualReport)> {
    let level = LevelSolution::solve(triangulate(domain, h)?)?;
    let crit = CriticalityLevel::new(&level)?;
    let report = residual_report(&level.mesh, &crit);
    Ok((level.mesh, report))
}

pub fn residual_report(mesh: &Mesh, crit: &CriticalityLevel) -> ResidualReport {
    let perimeter: f64 = mesh
        .boundary_edges
        .iter()
        .map(|e| mesh.edge_length(e))
        .sum();
    let g = crit.max_torsion * crit.lambda1;
    let sup = crit.residual.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let residual = crit.residual_field(mesh);
    let centroid = mesh_centroid(mesh);
    let dilation = crit.residual_integral(mesh, &ShapeVelocity::dilation(centroid));
    ResidualReport {
        normalized_sup: sup / (g / perimeter),
        mean_ratio: residual.integral(mesh) / g,
        dilation_ratio: dilation / g,
        green_flux_total: crit.green_flux.integral(mesh),
        max_torsion: crit.max_torsion,
        lambda1: crit.lambda1,
        x0: [crit.x0.x, crit.x0.y],
        perimeter,
        residual,
    }
}

fn mesh_centroid(mesh: &Mesh) -> Vec2 {
    let mut c = Vec2::zeros();
    let mut a = 0.0;
    for t in 0..mesh.num_triangles() {
        let p = mesh.triangle_points(t);
        let area = mesh.triangle_area(t);
        c += (p[0] + p[1] + p[2]) * (area / 3.0);
        a += area;
    }
    c / a
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeLevel {
    pub h: f64,
    pub g_prime: f64,
    pub lambda_times_m_prime: f64,
    pub m_times_lambda_prime: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub velocity: String,
    /// From the residual formula, extrapolated over the last two levels
    /// when more than one level was solved.
    pub g_prime: f64,
    /// `λ₁ M'` and `M λ₁'`, extrapolated the same way.
    pub lambda_times_m_prime: f64,
    pub m_times_lambda_prime: f64,
    pub g: f64,
    pub levels: Vec<DerivativeLevel>,
    /// The derivative formula is established for convex domains only.
    pub extended_beyond_hypotheses: bool,
    #[serde(skip)]
    pub residual: BoundaryField,
}

pub fn shape_derivative(
    domain: &Domain,
    velocity: &ShapeVelocity,
    h: f64,
    levels: usize,
) -> Result<DerivativeReport> {
    let sols = if levels >= 2 {
        solve_levels(domain, h, levels, &[])?
    } else {
        vec![LevelSolution::solve(triangulate(domain, h)?)?]
    };
    derivative_from_levels(domain, velocity, &sols)
}

pub fn derivative_from_levels(
    domain: &Domain,
    velocity: &ShapeVelocity,
    sols: &[LevelSolution],
) -> Result<DerivativeReport> {
    let mut rows = Vec::with_capacity(sols.len());
    let mut last = None;
    for s in sols {
        let crit = CriticalityLevel::new(s)?;
        let g_prime = crit.residual_integral(&s.mesh, velocity);
        let (mp, lp) = crit.derivatives(&s.mesh, velocity);
        rows.push(DerivativeLevel {
            h: s.mesh.h,
            g_prime,
            lambda_times_m_prime: crit.lambda1 * mp,
            m_times_lambda_prime: crit.max_torsion * lp,
        });
        last = Some(crit);
    }
    let last = last.expect("at least one level");
    let n = rows.len();
    let pick = |f: fn(&DerivativeLevel) -> f64| {
        if n >= 2 {
            richardson(f(&rows[n - 2]), f(&rows[n - 1]))
        } else {
            f(&rows[0])
        }
    };
    let g = if n >= 2 {
        let s = &sols[n - 2..];
        richardson(s[0].max_torsion(), s[1].max_torsion())
            * richardson(s[0].lambda(), s[1].lambda())
    } else {
        sols[0].max_torsion() * sols[0].lambda()
    };
    let name = match velocity {
        ShapeVelocity::Analytic { name, .. } => name.clone(),
        ShapeVelocity::Polygon { .. } => "vertex displacements".into(),
    };
    let mesh = &sols[n - 1].mesh;
    Ok(DerivativeReport {
        velocity: name,
        g_prime: pick(|r| r.g_prime),
        lambda_times_m_prime: pick(|r| r.lambda_times_m_prime),
        m_times_lambda_prime: pick(|r| r.m_times_lambda_prime),
        g,
        levels: rows,
        extended_beyond_hypotheses: !domain.is_convex(),
        residual: last.residual_field(mesh),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TopologicalValue {
    pub point: [f64; 2],
    /// Per-level values of `R`.
    pub levels: Vec<f64>,
    /// Extrapolated over the last two levels.
    pub value: f64,
}

/// `R(x) = M φ(x)² - λ₁ u(x) G(x0, x)` at each point. The points are inserted
/// as mesh vertices so that every nested level evaluates nodal values.
pub fn topological_field(
    domain: &Domain,
    points: &[Vec2],
    h: f64,
    levels: usize,
) -> Result<Vec<TopologicalValue>> {
    let sols = solve_levels(domain, h, levels.max(2), points)?;
    let mut per_point = vec![Vec::with_capacity(sols.len()); points.len()];
    for s in &sols {
        let crit_x0 = s.max_point.x0;
        let min_dist = 2.0 * s.mesh.h;
        for p in points {
            if (p - crit_x0).norm() <= min_dist {
                return Err(Error::InvalidPoint(format!(
                    "({}, {}) is within 2h of the torsion maximum",
                    p.x, p.y
                )));
            }
        }
        let green = s.disc.solve_green(&s.mesh, crit_x0)?;
        for (k, p) in points.iter().enumerate() {
            per_point[k].push(r_value(s, &green, *p)?);
        }
    }
    Ok(points
        .iter()
        .zip(per_point)
        .map(|(p, vals)| {
            let n = vals.len();
            TopologicalValue {
                point: [p.x, p.y],
                value: richardson(vals[n - 2], vals[n - 1]),
                levels: vals,
            }
        })
        .collect())
}

fn r_value(s: &LevelSolution, green: &GreenSolution, p: Vec2) -> Result<f64> {
    let phi = s.eigen.phi.interpolate(&s.mesh, p)?;
    let u = s.torsion.interpolate(&s.mesh, p)?;
    let g = green.eval(&s.mesh, p)?;
    Ok(s.max_torsion() * phi * phi - s.lambda() * u * g)
}

/// `(G(x0, x), G(x, x0))`: the Green function with pole at `x0` evaluated at
/// `x`, and with the roles swapped.
pub fn green_symmetry(level: &LevelSolution, x0: Vec2, x: Vec2) -> Result<(f64, f64)> {
    let a = level.disc.solve_green(&level.mesh, x0)?;
    let b = level.disc.solve_green(&level.mesh, x)?;
    Ok((a.eval(&level.mesh, x)?, b.eval(&level.mesh, x0)?))
}

/// `R` evaluated with the swapped Green function `G(x, x0)`.
pub fn r_value_swapped(level: &LevelSolution, p: Vec2) -> Result<f64> {
    let x0 = level.max_point.x0;
    let b = level.disc.solve_green(&level.mesh, p)?;
    let g = b.eval(&level.mesh, x0)?;
    let phi = level.eigen.phi.interpolate(&level.mesh, p)?;
    let u = level.torsion.interpolate(&level.mesh, p)?;
    Ok(level.max_torsion() * phi * phi - level.lambda() * u * g)
}

#[cfg(test)]
mod tests;
