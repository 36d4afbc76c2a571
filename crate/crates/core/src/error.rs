use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical kernels, the solver and the study harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A closed form is evaluated too close to a removable singularity.
    #[error("singular parameter: {0}")]
    SingularParameter(String),

    #[error("adaptive quadrature did not converge after {subdivisions} subdivisions (error estimate {estimate:.3e}, target {tol:.3e})")]
    QuadratureNotConverged {
        subdivisions: usize,
        estimate: f64,
        tol: f64,
    },

    #[error("Newton iteration for LGL node {node} of degree {degree} did not converge in {iterations} iterations")]
    NewtonNotConverged {
        degree: usize,
        node: usize,
        iterations: usize,
    },

    #[error("grid functions live on different bases")]
    BasisMismatch,

    /// Per-term fast states are not at the same step index.
    #[error("fast states out of sync: expected step {expected}, found {found}")]
    Desync { expected: usize, found: usize },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("system matrix is not positive definite")]
    NotPositiveDefinite,

    /// Initial data incompatible with homogeneous Dirichlet conditions.
    #[error("initial data violates the boundary condition: {0}")]
    Compatibility(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed report: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that stem from user configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Domain(_) | Error::Compatibility(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
