//! Central finite differences of `G` along a deformation, as an independent
//! check of the boundary formula.

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{functional_report, richardson, LevelSolution};
use crate::geometry::{Domain, Vec2};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FdPoint {
    pub t: f64,
    pub g_plus: f64,
    pub g_minus: f64,
    /// `(G(t) − G(−t)) / 2t`.
    pub derivative: f64,
}

impl FdPoint {
    fn new(t: f64, g_plus: f64, g_minus: f64) -> Self {
        FdPoint {
            t,
            g_plus,
            g_minus,
            derivative: (g_plus - g_minus) / (2.0 * t),
        }
    }
}

fn check_step(t: f64) -> Result<()> {
    if !(t > 0.0 && t < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step {t}"
        )));
    }
    Ok(())
}

/// Builds `Ω(±t)` from scratch with `deformed` and meshes each one
/// independently, so the two sides share nothing with the boundary formula.
pub fn central_difference_remeshed(
    deformed: &(dyn Fn(f64) -> Result<Domain> + Sync),
    t: f64,
    h: f64,
    levels: usize,
) -> Result<FdPoint> {
    check_step(t)?;
    let (plus, minus) = rayon::join(
        || functional_report(&deformed(t)?, h, levels).map(|r| r.g),
        || functional_report(&deformed(-t)?, h, levels).map(|r| r.g),
    );
    Ok(FdPoint::new(t, plus?, minus?))
}

/// Extrapolated `G` of a fixed hierarchy of meshes mapped by `x -> m x`.
fn mapped_g(meshes: &[Mesh], m: Matrix2<f64>) -> Result<f64> {
    let n = meshes.len();
    let sols: Vec<LevelSolution> = meshes[n - 2..]
        .iter()
        .map(|mesh| LevelSolution::solve(mesh.transformed(m, Vec2::zeros())))
        .collect::<Result<_>>()?;
    Ok(richardson(sols[0].max_torsion(), sols[1].max_torsion())
        * richardson(sols[0].lambda(), sols[1].lambda()))
}

/// Central differences along the linear flow `x -> (I + t A) x`, evaluated
/// on one nested hierarchy mapped by the flow. The mesh topology is the same
/// on both sides, so the difference carries no re-meshing noise and its error
/// follows the `t²` law.
pub fn central_differences_mapped(
    meshes: &[Mesh],
    generator: Matrix2<f64>,
    steps: &[f64],
) -> Result<Vec<FdPoint>> {
    if meshes.len() < 2 {
        return Err(Error::InvalidParameter(
            "at least 2 mesh levels are needed".into(),
        ));
    }
    steps.iter().try_for_each(|&t| check_step(t))?;
    let id = Matrix2::identity();
    steps
        .par_iter()
        .map(|&t| {
            let m_plus = id + generator * t;
            let m_minus = id - generator * t;
            if m_plus.determinant() <= 0.0 || m_minus.determinant() <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "step {t} folds the domain"
                )));
            }
            Ok(FdPoint::new(
                t,
                mapped_g(meshes, m_plus)?,
                mapped_g(meshes, m_minus)?,
            ))
        })
        .collect()
}

/// `log2(e_k / e_{k+1})` for errors at steps halved each time.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors
        .windows(2)
        .map(|w| (w[0].abs() / w[1].abs()).log2())
        .collect()
}
