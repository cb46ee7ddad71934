use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not a valid density matrix: {0}")]
    NotDensityMatrix(String),
    #[error("W parameters are all zero; normalization is undefined")]
    ZeroW,
    #[error("no time instants satisfy the weight threshold")]
    EmptyRegion,
    #[error("negative expected count {value} at index {index}")]
    NegativeExpectation { index: usize, value: f64 },
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
