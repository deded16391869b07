use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty sum")]
    EmptySum,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point outside model domain: {0}")]
    Domain(String),

    #[error("metric not PSD (min eigenvalue {min_eigenvalue:e})")]
    MetricNotPsd { min_eigenvalue: f64 },

    #[error("degenerate metric (condition number {condition:e})")]
    DegenerateMetric { condition: f64 },

    #[error("target unreachable in scan range: {0}")]
    TargetUnreachable(String),

    #[error("endpoint divergence at t = tau")]
    EndpointDivergence,

    #[error("undefined geodesic interior: endpoints are pure and orthogonal")]
    UndefinedGeodesic,

    #[error("differential is not tangent: block {block} sums to {sum:e}")]
    NotTangent { block: String, sum: f64 },

    #[error("missing subsets: expected {expected} energies, got {got}")]
    MissingSubsets { expected: usize, got: usize },

    #[error("power-law fit needs at least {needed} positive points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("non-positive value {0} in power-law fit")]
    NonPositive(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
