//! Torsion and first-eigenvalue shape functionals on plane domains.
//!
//! The crate meshes plane domains, solves the torsion, screened torsion,
//! Dirichlet eigenvalue and Green function problems with P1 finite elements,
//! and builds on those the functionals `F = T / (M |Ω|)` and `G = M λ₁`,
//! their shape and topological derivatives, canned studies and a convex
//! polygon optimizer.

pub mod error;
pub mod geometry;
pub mod mesh;

pub use error::{Error, Result};
pub mod experiments;
pub mod fem;
pub mod functionals;
pub mod optimizer;
pub mod output;
pub mod plot;
pub mod quadrature;
pub mod shape;
pub mod sparse;
