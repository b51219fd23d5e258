use thiserror::Error;

/// Library error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A multi-index order exceeded the supported factorial range.
    #[error("multi-index order {0} exceeds the supported maximum of 12")]
    OrderTooLarge(u32),

    /// A vector or index had the wrong dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A distribution failed validation.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// The covariance of the truncated sum is numerically singular.
    #[error("degenerate covariance: smallest eigenvalue {0:.3e} is below 1e-10")]
    DegenerateCovariance(f64),

    /// The Jacobi eigensolver did not reach its off-diagonal threshold.
    #[error("eigensolver failed to converge within {0} sweeps")]
    EigenNoConvergence(usize),

    /// A text document (distribution file, config file, weight file) was malformed.
    #[error("parse error: {0}")]
    Parse(String),

    /// A slope fit was requested with too few usable rows.
    #[error("fit requires at least {needed} usable rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    /// A requested operation needs a table of higher order than provided.
    #[error("table of order {have} cannot serve a request of order {need}")]
    OrderUnavailable { have: u32, need: u32 },

    /// Generic invalid-argument error.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
