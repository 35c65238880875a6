//! Crate error type.
//!
//! Domain errors are deliberately descriptive: the CLI surfaces them verbatim
//! in its JSON error reports, and the tuning/tracing loops use them to
//! distinguish "bad input" from "numerics gave up".

use thiserror::Error;

/// Errors produced by the trapnet library.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar or vector argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A path power series violates one of its invariants (unit tangent,
    /// arc-length consistency, required order support).
    #[error("invalid path: {0}")]
    InvalidPath(String),

    /// A multipole field violates a Maxwell constraint (tensor symmetry or
    /// tracelessness) beyond tolerance.
    #[error("invalid multipole field: {0}")]
    InvalidField(String),

    /// An electrode mesh failed validation (degenerate panel, duplicate
    /// panels, missing potential tag, ...).
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// A linear solve or eigen/SVD factorization failed or left a residual
    /// above tolerance.
    #[error("linear algebra failure: {0}")]
    Numerical(String),

    /// An iterative procedure (continuation, bisection, Newton corrector)
    /// did not converge within its budget.
    #[error("did not converge: {0}")]
    NoConvergence(String),

    /// File or serialization problem when loading/saving meshes and fields.
    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
