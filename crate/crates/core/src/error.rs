//! Crate-wide error type. Variants mirror the failure modes of the
//! pipeline stages so callers can report precise, categorised errors.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The requested shift degrees do not admit non-negative group counts.
    #[error(
        "infeasible shift degrees: group G{group} would need {fraction:.6} of the data \
         (degrees d_sc={d_sc}, d_ls={d_ls}, d_cs={d_cs})"
    )]
    InfeasibleDegrees {
        /// 1-based group index (G1..G4).
        group: usize,
        /// The (negative) real-valued fraction the closed form assigns.
        fraction: f64,
        d_sc: f64,
        d_ls: f64,
        d_cs: f64,
    },

    /// An input violates a structural precondition (empty data, zero counts,
    /// non-finite values, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Rejection sampling exhausted its attempt budget.
    #[error("sampling failure: no feasible degrees after {attempts} attempts")]
    SamplingFailure { attempts: usize },

    /// A grouped pool cannot supply the requested counts without replacement.
    #[error("pool capacity: group G{group} has {available} samples, {needed} requested")]
    PoolCapacity {
        group: usize,
        available: usize,
        needed: usize,
    },

    /// Feature-vector lengths disagree.
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    /// Training produced a non-finite loss.
    #[error("divergence: non-finite training loss at epoch {epoch}")]
    Divergence { epoch: usize },

    /// Training finished without improving on its initialization.
    #[error(
        "training did not improve: final loss {final_loss:.6} ≥ initial {initial_loss:.6}; \
         try a lower learning rate"
    )]
    NoImprovement { initial_loss: f64, final_loss: f64 },

    /// A test split is missing one of the four groups.
    #[error("invalid test split: group G{group} has no samples")]
    InvalidTest { group: usize },

    /// Under-sampling (or another group-wise operation) met an empty group.
    #[error("degenerate task: group G{group} is empty, {operation} requires every group")]
    MissingGroup { group: usize, operation: String },

    /// A persisted file failed to parse.
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// A persisted artifact does not match the data it is used with.
    #[error("fingerprint mismatch: {context} (expected {expected}, got {got})")]
    FingerprintMismatch {
        context: String,
        expected: String,
        got: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Wrap an [`std::io::Error`] with the path it occurred on.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
