use thiserror::Error;

/// Errors raised by field construction, quadrature setup, geometry and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("unknown catalog field `{0}`")]
    UnknownField(String),

    #[error("field `{name}` is not defined in dimension {dim}")]
    UnsupportedDimension { name: String, dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid is not uniform and periodic: {0}")]
    NonUniformGrid(String),

    #[error("grid shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("mollifier with {nodes} nodes misses the normalization check (relative error {error:e})")]
    Normalization { nodes: usize, error: f64 },

    #[error("integration step {0:e} is below the underflow limit")]
    StepUnderflow(f64),

    #[error("cylinder time span ({0}, {1}) lies entirely outside the flow horizon")]
    OutsideHorizon(f64, f64),

    #[error("dilated radius {radius} exceeds half the period {half_period}")]
    WrapAround { radius: f64, half_period: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("seed ({0}, {1:?}) lies outside the cylinder")]
    SeedOutside(f64, Vec<f64>),

    #[error("degenerate bounding box")]
    DegenerateBox,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("check `{check}` aborted: {source}")]
    Check {
        check: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
