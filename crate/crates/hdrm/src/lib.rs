//! Problem files, mesh files, the method comparison harness and report
//! output for the hybrid dual-reciprocity / finite-element solver.
//!
//! The numerical kernels live in [`hdrm_core`], re-exported as [`core`].
//! The `hdrm` binary wraps this crate:
//!
//! ```text
//! hdrm solve <problem-file> [--method M] [--out DIR]
//! hdrm compare <problem-file> [--out DIR]
//! hdrm mesh-info <mesh-file>
//! ```

pub use hdrm_core as core;

pub mod driver;
mod error;
pub mod mesh_io;
pub mod output;
pub mod problem_file;

pub use driver::{compare_methods, run_method, BenchmarkReport, Method, SolverReport};
pub use error::{DriverError, Issue, Result};
pub use problem_file::{MeshSource, ProblemFile};
