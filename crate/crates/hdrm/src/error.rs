use std::fmt;
use std::path::PathBuf;

/// One problem found while reading an input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    /// 1-based line number, when the problem is tied to a line.
    pub line: Option<usize>,
    pub message: String,
}

impl Issue {
    pub fn at(line: usize, message: impl Into<String>) -> Issue {
        Issue { line: Some(line), message: message.into() }
    }

    pub fn general(message: impl Into<String>) -> Issue {
        Issue { line: None, message: message.into() }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn list(issues: &[Issue]) -> String {
    issues.iter().map(Issue::to_string).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error("invalid input:\n{}", list(.0))]
    Validation(Vec<Issue>),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Solver(#[from] hdrm_core::Error),
    #[error("{0} did not converge")]
    NotConverged(String),
}

impl DriverError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> DriverError {
        DriverError::Io { path: path.into(), source }
    }

    /// Process exit status: 2 for bad input (including solver/problem
    /// combinations the solver rejects), 3 for non-convergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::Validation(_) | DriverError::Io { .. } => 2,
            DriverError::Solver(hdrm_core::Error::Config(_) | hdrm_core::Error::Unsupported(_)) => 2,
            DriverError::Solver(_) => 1,
            DriverError::NotConverged(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, DriverError>;
