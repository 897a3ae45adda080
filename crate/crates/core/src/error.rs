use thiserror::Error;

/// Errors raised by the curvature-flow laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("curvature tuple must have dimension n >= 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("curvature tuple contains a non-finite entry")]
    NonFinite,

    #[error("zero curvature tuple has no direction")]
    ZeroTuple,

    #[error("index m = {m} out of range: m must satisfy 0 <= m <= n-1 (n = {n})")]
    IndexOutOfRange { m: usize, n: usize },

    /// The curvature tuple left the cone of the speed (a type-0 hazard).
    #[error("type-0 hazard: curvature {kappa:?} outside cone {cone}")]
    ConeViolation { kappa: Vec<f64>, cone: String },

    #[error("degenerate eigenvalues {i} and {j} (gap {gap:e}) with no limit rule")]
    DegenerateEigenvalues { i: usize, j: usize, gap: f64 },

    #[error("cylinder tuple with m = {m} lies outside the closure of the domain of {speed}")]
    CylinderOutsideDomain { m: usize, speed: String },

    #[error("ratio unbounded on the cone slice near direction {direction:?}")]
    UnboundedRatio { direction: Vec<f64> },

    #[error("missing {0} for this pinching kind")]
    MissingInput(&'static str),

    #[error("G2 = {value} is not positive: Theta misconfigured")]
    ThetaMisconfigured { value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate stencil at node {0}")]
    DegenerateStencil(usize),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("index {index} out of range ({len} points)")]
    PointIndex { index: usize, len: usize },

    #[error("operation requires {0}")]
    Unsupported(&'static str),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("support hypothesis violated at node {node}: cylinder distance {distance} < margin {margin}")]
    SupportViolation { node: usize, distance: f64, margin: f64 },

    #[error("node {node} lies outside the required set: gap {gap} below margin {margin}")]
    MarginViolation { node: usize, gap: f64, margin: f64 },

    #[error("tracking failed: {0}")]
    Tracking(String),

    #[error("overflow guard breached: {0}")]
    Overflow(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
