use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the lab.
///
/// The variants map onto outcome classes the CLI turns into exit codes:
/// input/validation problems, numerical failures, divergence of a run and
/// violated properties.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed an out-of-range index, a mismatched dimension or an
    /// otherwise unusable argument.
    #[error("invalid input: {0}")]
    Input(String),

    /// A structure (MDP, kernel, config) violates one of its invariants.
    /// `field` names the offending location, e.g. `kernel[2][1]`.
    #[error("validation failed at `{field}`: {message}")]
    Validation { field: String, message: String },

    /// A computation produced a non-finite value or missed its tolerance.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Value iteration ran out of iterations.
    #[error("value iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    /// The iterate left the stability region (non-finite or norm above the guard).
    #[error("iterate diverged at step {step}: {reason}")]
    Diverged { step: u64, reason: String },

    /// An operation was called before its precondition held.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A checked property did not hold; the message carries the witness.
    #[error("property violated: {0}")]
    Property(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
