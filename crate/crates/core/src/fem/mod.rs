//! P1 finite elements on a [`Mesh`]: torsion, screened torsion, the first
//! Dirichlet eigenpair and the Green function, plus boundary flux recovery.

mod eigen;
mod export;

pub use eigen::{lanczos_smallest, EIGEN_MAX_ITERS, EIGEN_TOL};
pub use export::{write_field_svg, write_field_text};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cross, Vec2};
use crate::mesh::Mesh;
use crate::sparse::{dot, CsrMatrix, SpdSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Torsion,
    Screened,
    Eigenfunction,
    GreenRegularPart,
}

/// Vertex values of a P1 function on one mesh.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub mesh_id: u64,
    pub values: Vec<f64>,
    pub kind: FieldKind,
}

impl ScalarField {
    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh_id != mesh.id() || self.values.len() != mesh.num_vertices() {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }

    /// Exact integral of the P1 interpolant.
    pub fn integral(&self, mesh: &Mesh) -> f64 {
        let mut s = 0.0;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let a = mesh.triangle_area(t);
            s += a / 3.0 * (self.values[tri[0]] + self.values[tri[1]] + self.values[tri[2]]);
        }
        s
    }

    pub fn interpolate(&self, mesh: &Mesh, p: Vec2) -> Result<f64> {
        self.check(mesh)?;
        mesh.interpolate(&self.values, p)
            .ok_or_else(|| Error::InvalidPoint(format!("({}, {}) is not in the mesh", p.x, p.y)))
    }
}

#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub lambda1: f64,
    /// Normalized so that the consistent-mass norm is one; nonnegative.
    pub phi: ScalarField,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct GreenSolution {
    pub x0: Vec2,
    /// Harmonic correction `w` in `G(y) = -(1/2π) ln|y - x0| + w(y)`.
    pub regular_part: ScalarField,
}

/// `-(1/2π) ln r`.
pub fn fundamental_solution(y: Vec2, x0: Vec2) -> f64 {
    -(y - x0).norm().ln() / (2.0 * PI)
}

impl GreenSolution {
    pub fn eval(&self, mesh: &Mesh, y: Vec2) -> Result<f64> {
        if (y - self.x0).norm() == 0.0 {
            return Err(Error::InvalidPoint(
                "Green function evaluated at its pole".into(),
            ));
        }
        Ok(fundamental_solution(y, self.x0) + self.regular_part.interpolate(mesh, y)?)
    }

    /// Vertex values, with the pole vertex (if any) left infinite.
    pub fn vertex_values(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.vertices
            .iter()
            .zip(&self.regular_part.values)
            .map(|(p, w)| {
                if *p == self.x0 {
                    f64::INFINITY
                } else {
                    fundamental_solution(*p, self.x0) + w
                }
            })
            .collect()
    }
}

/// Edgewise outward normal derivatives, one value per `mesh.boundary_edges`
/// entry (the edge average).
#[derive(Debug, Clone)]
pub struct BoundaryField {
    pub mesh_id: u64,
    pub values: Vec<f64>,
    pub loop_ids: Vec<usize>,
}

impl BoundaryField {
    /// `Σ value · length`.
    pub fn integral(&self, mesh: &Mesh) -> f64 {
        mesh.boundary_edges
            .iter()
            .zip(&self.values)
            .map(|(e, v)| v * mesh.edge_length(e))
            .sum()
    }

    /// Arc-length position of each edge midpoint along its loop.
    pub fn arc_positions(&self, mesh: &Mesh) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        let mut current_loop = usize::MAX;
        let mut s = 0.0;
        for e in &mesh.boundary_edges {
            if e.loop_id != current_loop {
                current_loop = e.loop_id;
                s = 0.0;
            }
            let l = mesh.edge_length(e);
            out.push(s + 0.5 * l);
            s += l;
        }
        out
    }
}

/// Right-hand side a field satisfies: `-Δf = constant + coefficient · f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Source {
    pub constant: f64,
    pub field_coefficient: f64,
}

impl Source {
    pub fn torsion() -> Self {
        Source {
            constant: 1.0,
            field_coefficient: 0.0,
        }
    }

    pub fn eigenfunction(lambda: f64) -> Self {
        Source {
            constant: 0.0,
            field_coefficient: lambda,
        }
    }

    pub fn harmonic() -> Self {
        Source {
            constant: 0.0,
            field_coefficient: 0.0,
        }
    }

    /// `-Δu + a u = 1`.
    pub fn screened(a: f64) -> Self {
        Source {
            constant: 1.0,
            field_coefficient: -a,
        }
    }
}

/// Assembled stiffness and consistent mass matrices of a mesh together with
/// the interior numbering. Reused across solves on the same mesh.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh_id: u64,
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    /// `∫ ψ_i` for every vertex hat function.
    pub load: Vec<f64>,
    pub interior: Vec<usize>,
    /// Position of each vertex among the interior unknowns.
    pub interior_pos: Vec<Option<usize>>,
    stiffness_ii: CsrMatrix,
    mass_ii: CsrMatrix,
}

impl Discretization {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let n = mesh.num_vertices();
        let mut kt = Vec::with_capacity(9 * mesh.num_triangles());
        let mut mt = Vec::with_capacity(9 * mesh.num_triangles());
        let mut load = vec![0.0; n];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let p = mesh.triangle_points(t);
            let area = 0.5 * cross(p[1] - p[0], p[2] - p[0]);
            // gradients of the barycentric coordinates times 2A
            let grads: [Vec2; 3] = std::array::from_fn(|k| {
                let e = p[(k + 2) % 3] - p[(k + 1) % 3];
                Vec2::new(-e.y, e.x)
            });
            for i in 0..3 {
                load[tri[i]] += area / 3.0;
                for j in 0..3 {
                    kt.push((tri[i], tri[j], grads[i].dot(&grads[j]) / (4.0 * area)));
                    let m = if i == j { area / 6.0 } else { area / 12.0 };
                    mt.push((tri[i], tri[j], m));
                }
            }
        }
        let stiffness = CsrMatrix::from_triplets(n, &kt);
        let mass = CsrMatrix::from_triplets(n, &mt);
        let interior: Vec<usize> = (0..n).filter(|&i| mesh.interior_mask[i]).collect();
        if interior.is_empty() {
            return Err(Error::MeshTooCoarse);
        }
        let mut interior_pos = vec![None; n];
        for (k, &i) in interior.iter().enumerate() {
            interior_pos[i] = Some(k);
        }
        let stiffness_ii = stiffness.principal_submatrix(&mesh.interior_mask);
        let mass_ii = mass.principal_submatrix(&mesh.interior_mask);
        Ok(Self {
            mesh_id: mesh.id(),
            stiffness,
            mass,
            load,
            interior,
            interior_pos,
            stiffness_ii,
            mass_ii,
        })
    }

    fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh_id != mesh.id() {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }

    fn scatter(&self, interior_values: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.load.len()];
        for (k, &i) in self.interior.iter().enumerate() {
            full[i] = interior_values[k];
        }
        full
    }

    fn field(&self, values: Vec<f64>, kind: FieldKind) -> ScalarField {
        ScalarField {
            mesh_id: self.mesh_id,
            values,
            kind,
        }
    }

    pub fn solve_torsion(&self) -> Result<ScalarField> {
        let rhs: Vec<f64> = self.interior.iter().map(|&i| self.load[i]).collect();
        let x = SpdSolver::new(self.stiffness_ii.clone()).solve(&rhs)?;
        Ok(self.field(self.scatter(&x), FieldKind::Torsion))
    }

    pub fn solve_screened(&self, a: f64) -> Result<ScalarField> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!("screening constant {a}")));
        }
        if a == 0.0 {
            return self.solve_torsion();
        }
        let rhs: Vec<f64> = self.interior.iter().map(|&i| self.load[i]).collect();
        let matrix = self.stiffness_ii.add_scaled(a, &self.mass_ii);
        let x = SpdSolver::new(matrix).solve(&rhs)?;
        Ok(self.field(self.scatter(&x), FieldKind::Screened))
    }

    pub fn solve_eigenpair(&self) -> Result<EigenSolution> {
        let solver = SpdSolver::new(self.stiffness_ii.clone());
        let start = vec![1.0; self.interior.len()];
        let (_, mut x, iterations) =
            lanczos_smallest(&solver, &self.mass_ii, &start, EIGEN_TOL, EIGEN_MAX_ITERS)?;
        let kx = self.stiffness_ii.mul_vec(&x);
        let mx = self.mass_ii.mul_vec(&x);
        let mnorm = dot(&x, &mx).sqrt();
        let lambda1 = dot(&x, &kx) / dot(&x, &mx);
        let sign = if x.iter().sum::<f64>() < 0.0 {
            -1.0
        } else {
            1.0
        };
        for v in &mut x {
            *v *= sign / mnorm;
        }
        Ok(EigenSolution {
            lambda1,
            phi: self.field(self.scatter(&x), FieldKind::Eigenfunction),
            iterations,
        })
    }

    pub fn solve_green(&self, mesh: &Mesh, x0: Vec2) -> Result<GreenSolution> {
        self.check(mesh)?;
        let min_dist = 2.0 * mesh.h;
        let boundary_dist = mesh
            .boundary_edges
            .iter()
            .map(|e| {
                crate::geometry::point_segment_distance(x0, mesh.vertices[e.a], mesh.vertices[e.b])
            })
            .fold(f64::INFINITY, f64::min);
        if mesh.locate(x0).is_none() || boundary_dist <= min_dist {
            return Err(Error::InvalidPoint(format!(
                "source ({}, {}) must lie inside the domain at distance > 2h = {min_dist:.3e} from the boundary",
                x0.x, x0.y
            )));
        }
        let n = mesh.num_vertices();
        let mut data = vec![0.0; n];
        for (i, p) in mesh.vertices.iter().enumerate() {
            if !mesh.interior_mask[i] {
                data[i] = -fundamental_solution(*p, x0);
            }
        }
        let kd = self.stiffness.mul_vec(&data);
        let rhs: Vec<f64> = self.interior.iter().map(|&i| -kd[i]).collect();
        let x = SpdSolver::new(self.stiffness_ii.clone()).solve(&rhs)?;
        let mut values = data;
        for (k, &i) in self.interior.iter().enumerate() {
            values[i] = x[k];
        }
        Ok(GreenSolution {
            x0,
            regular_part: self.field(values, FieldKind::GreenRegularPart),
        })
    }

    /// Consistent flux recovery: the nodal flux `g` on the boundary solves
    /// `∮ g ψ_i = a(f, ψ_i) - ∫ s ψ_i` for every boundary hat `ψ_i`; edge values
    /// are averages of the endpoint values.
    pub fn boundary_flux(
        &self,
        mesh: &Mesh,
        field: &ScalarField,
        source: Source,
    ) -> Result<BoundaryField> {
        self.check(mesh)?;
        field.check(mesh)?;
        let kf = self.stiffness.mul_vec(&field.values);
        let mf = if source.field_coefficient != 0.0 {
            self.mass.mul_vec(&field.values)
        } else {
            vec![0.0; kf.len()]
        };
        let n = mesh.num_vertices();
        let mut bpos = vec![None; n];
        let mut bverts = Vec::new();
        for e in &mesh.boundary_edges {
            for v in [e.a, e.b] {
                if bpos[v].is_none() {
                    bpos[v] = Some(bverts.len());
                    bverts.push(v);
                }
            }
        }
        let residual: Vec<f64> = bverts
            .iter()
            .map(|&i| kf[i] - source.constant * self.load[i] - source.field_coefficient * mf[i])
            .collect();
        let mut trip = Vec::with_capacity(4 * mesh.boundary_edges.len());
        for e in &mesh.boundary_edges {
            let l = mesh.edge_length(e);
            let (a, b) = (bpos[e.a].unwrap(), bpos[e.b].unwrap());
            trip.push((a, a, l / 3.0));
            trip.push((b, b, l / 3.0));
            trip.push((a, b, l / 6.0));
            trip.push((b, a, l / 6.0));
        }
        let mut solver = SpdSolver::new(CsrMatrix::from_triplets(bverts.len(), &trip));
        solver.tol = 1e-14;
        let nodal = solver.solve(&residual)?;
        let values = mesh
            .boundary_edges
            .iter()
            .map(|e| 0.5 * (nodal[bpos[e.a].unwrap()] + nodal[bpos[e.b].unwrap()]))
            .collect();
        Ok(BoundaryField {
            mesh_id: mesh.id(),
            values,
            loop_ids: mesh.boundary_edges.iter().map(|e| e.loop_id).collect(),
        })
    }

    /// Edge-averaged normal derivative of the full Green function: the
    /// singular part exactly (subtended angle), the regular part by recovery.
    pub fn green_flux(&self, mesh: &Mesh, green: &GreenSolution) -> Result<BoundaryField> {
        let mut flux = self.boundary_flux(mesh, &green.regular_part, Source::harmonic())?;
        for (e, v) in mesh.boundary_edges.iter().zip(&mut flux.values) {
            let a = mesh.vertices[e.a] - green.x0;
            let b = mesh.vertices[e.b] - green.x0;
            let angle = cross(a, b).atan2(a.dot(&b));
            *v += -angle / (2.0 * PI) / mesh.edge_length(e);
        }
        Ok(flux)
    }

    /// Discrete Rayleigh quotient of a field vanishing on the boundary.
    pub fn rayleigh_quotient(&self, field: &ScalarField) -> f64 {
        self.stiffness.quadratic_form(&field.values) / self.mass.quadratic_form(&field.values)
    }

    /// Residual of the interior stiffness equations for a harmonic field,
    /// relative to the size of the boundary coupling.
    pub fn harmonic_residual(&self, field: &ScalarField) -> f64 {
        let kf = self.stiffness.mul_vec(&field.values);
        let scale = crate::sparse::norm(&kf).max(f64::MIN_POSITIVE);
        let interior: Vec<f64> = self.interior.iter().map(|&i| kf[i]).collect();
        crate::sparse::norm(&interior) / scale
    }

    /// `∫ f g` with the consistent mass matrix.
    pub fn l2_inner(&self, f: &ScalarField, g: &ScalarField) -> f64 {
        dot(&f.values, &self.mass.mul_vec(&g.values))
    }
}

pub fn solve_torsion(mesh: &Mesh) -> Result<ScalarField> {
    Discretization::new(mesh)?.solve_torsion()
}

pub fn solve_screened(mesh: &Mesh, a: f64) -> Result<ScalarField> {
    Discretization::new(mesh)?.solve_screened(a)
}

pub fn solve_eigenpair(mesh: &Mesh) -> Result<EigenSolution> {
    Discretization::new(mesh)?.solve_eigenpair()
}

pub fn solve_green(mesh: &Mesh, x0: Vec2) -> Result<GreenSolution> {
    Discretization::new(mesh)?.solve_green(mesh, x0)
}

pub fn boundary_flux(mesh: &Mesh, field: &ScalarField, source: Source) -> Result<BoundaryField> {
    Discretization::new(mesh)?.boundary_flux(mesh, field, source)
}

#[cfg(test)]
mod tests;
