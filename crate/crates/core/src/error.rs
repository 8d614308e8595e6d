use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("shifted window does not overlap the original window")]
    EmptyWindow,
    #[error("location ({x}, {y}) lies outside the field window")]
    OutOfDomain { x: f64, y: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("circulant embedding clipped {clipped:.4} of the spectral mass (limit 0.01)")]
    EmbeddingFailed { clipped: f64 },
    #[error("covariate {0} has zero variance over the window")]
    DegenerateCovariate(usize),
    #[error("{got} covariates supplied, the kernel estimator accepts at most {limit}")]
    TooManyCovariates { got: usize, limit: usize },
    #[error("singular design: {0}")]
    SingularDesign(String),
    #[error("fit did not converge: {0}")]
    NonConvergence(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("at least two observations are required, got {0}")]
    TooFewObservations(usize),
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the caller's data or configuration rather
    /// than by a failure inside the library.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::EmbeddingFailed { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
