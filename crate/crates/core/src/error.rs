use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Degenerate or otherwise unusable geometry.
    InvalidGeometry(String),
    ElementNotFound(usize),
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    /// A field evaluated to NaN or infinity at the given point.
    NonFinite {
        x: f64,
        y: f64,
    },
    /// Krylov breakdown (zero Arnoldi norm with a nonzero residual, or rho = 0).
    Breakdown {
        solver: &'static str,
        iteration: usize,
    },
    SingularDiagonal {
        row: usize,
    },
    /// Pivot below the relative threshold during elimination.
    SingularMatrix {
        column: usize,
    },
    /// Kernel evaluated at coincident source and field points.
    Singularity,
    InvalidDiscretization(String),
    DegenerateCenters,
    /// Boundary data does not determine a unique solution (e.g. all-Neumann).
    NonUnique,
    /// Diffusion tensor not symmetric positive definite at a quadrature point.
    Coefficient {
        element: usize,
        x: f64,
        y: f64,
    },
    ConstraintConflict {
        node: usize,
    },
    InconsistentDerivative {
        u: f64,
        relative_error: f64,
    },
    Config(String),
    Unsupported(String),
    OutsideMesh {
        x: f64,
        y: f64,
    },
    /// Failure inside a Newton step, tagged with the outer iteration.
    Newton {
        iteration: usize,
        source: Box<Error>,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGeometry(msg) => write!(f, "invalid geometry: {msg}"),
            Error::ElementNotFound(id) => write!(f, "element {id} not found"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NonFinite { x, y } => write!(f, "non-finite value at ({x}, {y})"),
            Error::Breakdown { solver, iteration } => {
                write!(f, "{solver} breakdown at iteration {iteration}")
            }
            Error::SingularDiagonal { row } => write!(f, "zero diagonal entry in row {row}"),
            Error::SingularMatrix { column } => {
                write!(f, "matrix is singular to working precision (column {column})")
            }
            Error::Singularity => write!(f, "fundamental solution evaluated at its source point"),
            Error::InvalidDiscretization(msg) => write!(f, "invalid boundary discretization: {msg}"),
            Error::DegenerateCenters => write!(f, "RBF interpolation matrix is singular"),
            Error::NonUnique => write!(f, "boundary conditions do not fix a unique solution"),
            Error::Coefficient { element, x, y } => write!(
                f,
                "diffusion tensor not SPD in element {element} at ({x}, {y})"
            ),
            Error::ConstraintConflict { node } => {
                write!(f, "conflicting Dirichlet values for node {node}")
            }
            Error::InconsistentDerivative { u, relative_error } => write!(
                f,
                "boundary law derivative disagrees with finite differences at u = {u} (rel. error {relative_error:e})"
            ),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
            Error::OutsideMesh { x, y } => write!(f, "point ({x}, {y}) lies outside the mesh"),
            Error::Newton { iteration, source } => {
                write!(f, "Newton iteration {iteration}: {source}")
            }
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::Newton { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}
