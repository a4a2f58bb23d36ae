use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no samples")]
    NoSamples,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inconsistent moments: quadratic form evaluated to {0:e}")]
    InconsistentMoments(f64),

    #[error("not an equilibrium: {0}")]
    NotAnEquilibrium(String),

    #[error("stability analysis requires n > m (n = {n}, m = {m})")]
    StabilityNeedsWideEmbedding { n: usize, m: usize },

    #[error("radius {0} is not in the equilibrium set")]
    RadiusNotInSet(f64),

    #[error("delta ([yyᵀ]) is required for this operation")]
    MissingDelta,

    #[error("diverged at t = {0}")]
    Diverged(f64),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
