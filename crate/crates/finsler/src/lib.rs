//! Numerical spray and Finsler geometry toolkit.
//!
//! The crate computes the geometric objects attached to a spray on the
//! slashed tangent bundle — nonlinear connection, Jacobi endomorphism,
//! curvature, Berwald coefficients — applies projective deformations
//! S̃ = S − 2P𝔠, and verifies the resulting identities at machine precision:
//! deformation formulas for connection and Jacobi endomorphism, eigenvalue
//! shifts on the g-orthocomplement of the flow direction, and the holonomy
//! obstruction that detects sprays which no Finsler function can generate.
//!
//! Derivatives come from runtime-depth nested dual numbers
//! ([`autodiff::Jet`]), so every derived object — including iterated Lie
//! brackets of frame fields — stays differentiable to the order the
//! formulas need, with a finite-difference oracle available for
//! cross-checking.
//!
//! Batch evaluation over many chart points runs in parallel via rayon when
//! the `parallel` feature (on by default) is enabled; disabling it leaves a
//! sequential fallback with an identical API.

pub mod autodiff;
pub mod batch;
pub mod chart;
pub mod checks;
pub mod error;
pub mod geodesics;
pub mod holonomy;
pub mod linalg;
pub mod models;
pub mod projective;
pub mod spray;

/// Full-precision decimal formatting (17 significant digits) used for every
/// number that lands in a report or CSV, so identical runs produce
/// byte-identical files.
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

pub use autodiff::{Jet, MultiIndex, ScalarField, VectorFieldTM};
pub use chart::ChartPoint;
pub use error::{GeomError, Result};
pub use models::FinslerModel;
pub use projective::{DeformationContext, ProjectiveFactor};
pub use spray::SprayData;
