//! Crate-wide error type.
//!
//! Every failure mode carries enough context to act on (the offending key,
//! value, grid location, …) and maps onto the process exit-code convention of
//! the command line tool: `1` for validation problems (bad arguments, bad
//! configuration, bad input files), `2` for runtime or numerical failures
//! (instability, non-finite values, I/O trouble mid-run).

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// A configuration key failed validation. `key` is the full path, e.g. `grid.nx`.
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    /// A function argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A frequency vector that must lie on the unit sphere does not.
    #[error("frequency vector must have unit length, got |xi| = {norm}")]
    NotUnit { norm: f64 },

    /// A state value left the model's state interval.
    #[error("state value {value} outside the interval [{lo}, {hi}] ({context})")]
    OutOfInterval {
        value: f64,
        lo: f64,
        hi: f64,
        context: String,
    },

    /// A vector or array had the wrong number of entries.
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    /// Two gridded fields that must share a shape do not.
    #[error("grid shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    /// Only one and two space dimensions are supported.
    #[error("unsupported dimension d = {d} ({context})")]
    UnsupportedDimension { d: usize, context: &'static str },

    /// A scalar argument exceeded the range the operation can resolve
    /// (frequency beyond the partition cap, block index beyond Nyquist, …).
    #[error("{what} = {value} exceeds the supported range (limit {limit})")]
    OutOfRange {
        what: &'static str,
        value: f64,
        limit: f64,
    },

    /// A diffusion matrix was not positive semidefinite where it must be.
    #[error("diffusion matrix not positive semidefinite at lambda = {lambda} (eigenvalue {eigenvalue})")]
    NotPositiveSemidefinite { lambda: f64, eigenvalue: f64 },

    /// A tabulated model file could not be interpreted.
    #[error("bad coefficient table {path}: {message}")]
    BadTable { path: PathBuf, message: String },

    /// A snapshot file was malformed or truncated.
    #[error("bad snapshot file {path}: {message}")]
    BadSnapshot { path: PathBuf, message: String },

    /// The grid resolves too few dyadic blocks for a slope fit.
    #[error("insufficient resolution: need at least {needed} usable dyadic blocks, got {got}")]
    InsufficientResolution { needed: usize, got: usize },

    /// The quadratic-cost seminorm oracle refuses large grids.
    #[error("grid too large for the direct seminorm oracle: {got} points (limit {limit})")]
    TooManyPoints { limit: usize, got: usize },

    /// The time step no longer satisfies the stability bound (the wave speed or
    /// the solution range grew beyond what the step was derived from).
    #[error("CFL violation at step {step}: dt = {dt} exceeds the stability bound {dt_max}")]
    CflViolation { step: usize, dt: f64, dt_max: f64 },

    /// A non-finite value appeared mid-computation.
    #[error("non-finite value at step {step} ({context})")]
    NonFinite { step: usize, context: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 = validation, 2 = runtime/numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::InvalidArgument(_)
            | Error::NotUnit { .. }
            | Error::OutOfInterval { .. }
            | Error::DimensionMismatch { .. }
            | Error::ShapeMismatch { .. }
            | Error::UnsupportedDimension { .. }
            | Error::OutOfRange { .. }
            | Error::NotPositiveSemidefinite { .. }
            | Error::BadTable { .. }
            | Error::BadSnapshot { .. }
            | Error::InsufficientResolution { .. }
            | Error::TooManyPoints { .. } => 1,
            Error::CflViolation { .. }
            | Error::NonFinite { .. }
            | Error::Io(_)
            | Error::Csv(_) => 2,
        }
    }

    /// Short machine-readable code for the diagnostics stream.
    pub fn code_name(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NotUnit { .. } => "not_unit",
            Error::OutOfInterval { .. } => "out_of_interval",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::UnsupportedDimension { .. } => "unsupported_dimension",
            Error::OutOfRange { .. } => "out_of_range",
            Error::NotPositiveSemidefinite { .. } => "not_psd",
            Error::BadTable { .. } => "bad_table",
            Error::BadSnapshot { .. } => "bad_snapshot",
            Error::InsufficientResolution { .. } => "insufficient_resolution",
            Error::TooManyPoints { .. } => "too_many_points",
            Error::CflViolation { .. } => "cfl_violation",
            Error::NonFinite { .. } => "non_finite",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_validation_from_runtime() {
        let v = Error::Config {
            key: "grid.nx".into(),
            message: "must be positive".into(),
        };
        assert_eq!(v.exit_code(), 1);
        let r = Error::CflViolation {
            step: 7,
            dt: 1e-3,
            dt_max: 5e-4,
        };
        assert_eq!(r.exit_code(), 2);
    }

    #[test]
    fn messages_name_the_offending_key() {
        let e = Error::Config {
            key: "grid.nx".into(),
            message: "must be >= 8".into(),
        };
        let text = e.to_string();
        assert!(text.contains("grid.nx"), "{text}");
    }
}
