//! Numerical laboratory for elliptic transmission problems with
//! jump-discontinuous coefficients.
//!
//! The crate provides an interface-fitted P1 finite element solver for
//! `div(A ∇u) = 0`, the functionals that enter quantitative unique
//! continuation estimates (region integrals, Dirichlet energies, a discrete
//! `H^{1/2}` seminorm), calibrate-and-verify harnesses for three-region,
//! three-sphere, propagation-of-smallness and Carleman-type inequalities, and
//! the inclusion size estimation pipeline driven by one boundary power
//! measurement.

pub mod error;
pub mod fields;
pub mod functionals;
pub mod geometry;
pub mod json;
pub mod mat;
pub mod sizeest;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
