use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
///
/// Every variant carries enough context to identify the offending input
/// (path, line, or value) without access to the call site.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying I/O failure, tagged with the path that was being accessed.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The bytes at `path` do not form a PGM image we can read.
    #[error("{path}: invalid PGM: {reason}")]
    Pgm { path: PathBuf, reason: String },

    /// Raster construction or geometry problem (zero dimension, length mismatch, ...).
    #[error("image error: {reason}")]
    Image { reason: String },

    /// A dataset manifest could not be parsed or failed validation.
    /// `line` is 1-based; 0 means the problem is not tied to a single line.
    #[error("{path}:{line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    /// Filter-bank parameter or application problem.
    #[error("filter error: {reason}")]
    Filter { reason: String },

    /// Block feature extraction problem.
    #[error("feature error: {reason}")]
    Feature { reason: String },

    /// Kernel function parameter or evaluation problem.
    #[error("kernel error: {reason}")]
    Kernel { reason: String },

    /// Eigensolver failure (non-symmetric input, non-finite entries, no convergence).
    #[error("eigensolver error: {reason}")]
    Eigen { reason: String },

    /// Subspace model fitting or projection problem.
    #[error("model error: {reason}")]
    Model { reason: String },

    /// A serialized model file is unreadable or has the wrong format.
    #[error("{path}: bad model file: {reason}")]
    ModelFile { path: PathBuf, reason: String },

    /// Classifier construction or distance evaluation problem.
    #[error("classifier error: {reason}")]
    Classify { reason: String },

    /// Evaluation protocol problem (bad threshold, empty counts, ...).
    #[error("evaluation error: {reason}")]
    Eval { reason: String },

    /// Configuration file or option problem.
    #[error("config error: {reason}")]
    Config { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
