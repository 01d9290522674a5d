use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// The operator does not have full row rank, so the back-projection term is undefined.
    #[error("operator is rank deficient: smallest singular value {smallest:e} <= tol {tol:e} (largest {largest:e})")]
    RankDeficient { smallest: f64, largest: f64, tol: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("operator must have rows <= cols, got {rows}x{cols}")]
    WideShape { rows: usize, cols: usize },

    #[error("bad vector length {len} for a {side}x{side} image")]
    BadLength { len: usize, side: usize },

    #[error("bad geometry: {0}")]
    BadGeometry(String),

    #[error("column {0} is zero")]
    ZeroColumn(usize),

    #[error("l1-ball radius must be positive, got {0}")]
    NonpositiveRadius(f64),

    #[error("threshold must be non-negative, got {0}")]
    NegativeThreshold(f64),

    #[error("regularizer must have a positive weight, got {0}")]
    NonpositiveWeight(f64),

    #[error("linear system is singular")]
    SingularSystem,

    #[error("prior variant {found} does not support {operation}")]
    WrongVariant {
        operation: &'static str,
        found: &'static str,
    },

    #[error("iterate became non-finite or exceeded the divergence guard at iteration {iteration}")]
    NonFiniteIterate { iteration: usize },

    #[error("bad solver configuration: {0}")]
    BadConfig(String),

    #[error("support size {k} must satisfy 1 <= k <= {max}")]
    BadSupportSize { k: usize, max: usize },

    #[error("contraction delta must lie in (0, 1], got {0}")]
    BadDelta(f64),

    #[error("need at least {needed} usable points for a rate fit, got {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("k = {k} must satisfy 1 <= k <= {n}")]
    BadK { k: usize, n: usize },

    #[error("clean signal is zero, finite SNR is undefined")]
    ZeroSignal,

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("image is not square: {width}x{height}")]
    NonSquare { width: usize, height: usize },

    #[error("image side {0} is not a power of two")]
    NonPowerOfTwo(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("linear algebra backend failed: {0}")]
    Backend(String),
}

pub type Result<T> = std::result::Result<T, Error>;
