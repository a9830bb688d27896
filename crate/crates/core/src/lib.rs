//! Numerical kernels for a hybrid dual-reciprocity / finite-element solver.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! - [`mesh`]: triangulated rectangles and conforming red refinement
//! - [`quadrature`]: triangle and Gauss-Legendre rules
//! - [`linalg`]: sparse/dense storage, GMRES, BiCGSTAB, Gauss-Seidel, LU
//! - [`drm`]: constant-element boundary integrals with dual-reciprocity
//!   treatment of the source term
//! - [`fem`]: P1 assembly for `-div(A grad u) + b . grad u + c(x, u) = f`
//! - [`newton`]: Newton-Krylov iteration for nonlinear boundary conditions
//! - [`adapt`]: gradient-indicator adaptive refinement
//! - [`hybrid`]: overlapping Schwarz coupling of the DRM and FEM regions
//! - [`baselines`]: the comparison iterations (Gauss-Seidel sweeps, dynamic
//!   relaxation) and the error-difference table
//!
//! File formats, timing, and the command line live in the `hdrm` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adapt;
pub mod baselines;
pub mod drm;
mod error;
pub mod fem;
pub mod field;
pub mod hybrid;
pub mod linalg;
pub mod mesh;
pub mod newton;
pub mod problem;
pub mod quadrature;

pub use error::{Error, Result};
pub use mesh::Mesh;
pub use problem::ProblemSpec;
