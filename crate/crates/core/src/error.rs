use thiserror::Error;

use crate::expr::ParseError;

/// Errors produced by the geometric engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unknown identifier `{name}` (not a coordinate or parameter)")]
    UnknownIdentifier { name: String },
    #[error("chart mismatch: expected `{expected}`, found `{found}`")]
    ChartMismatch { expected: String, found: String },
    #[error("degree overflow: degree {degree} exceeds chart dimension {dimension}")]
    DegreeOverflow { degree: usize, dimension: usize },
    #[error("point has {found} coordinates, chart `{chart}` expects {expected}")]
    PointLength { chart: String, expected: usize, found: usize },
    #[error("domain violation on chart `{chart}`: {guard} (value {value})")]
    Domain { chart: String, guard: String, value: f64 },
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("invalid form: {0}")]
    InvalidForm(String),
    #[error("degenerate structure at point: {0}")]
    Degenerate(String),
    #[error("singular flat matrix at point")]
    SingularFlat,
    #[error("structure is not cosymplectic")]
    NotCosymplectic,
    #[error("chart has no Darboux layout")]
    NoDarbouxLayout,
    #[error("empty probe set")]
    EmptyProbes,
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("unknown structure `{0}`")]
    UnknownStructure(String),
    #[error("theta coefficient c must be nonzero")]
    ZeroThetaC,
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Input(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
