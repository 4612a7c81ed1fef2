use thiserror::Error;

/// Errors produced by the topology-inference routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid edge weight {weight} on ({i}, {j})")]
    InvalidWeight { i: usize, j: usize, weight: f64 },
    #[error("vertex index {index} out of range for n = {n}")]
    BadIndex { index: usize, n: usize },
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    BadDimension { expected: usize, got: usize },
    #[error("operation requires a {expected} shift operator, got {got}")]
    WrongKind { expected: &'static str, got: &'static str },
    #[error("count {k} out of range [{lo}, {hi}]")]
    BadK { k: usize, lo: usize, hi: usize },
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("constraint set is infeasible: {0}")]
    Infeasible(String),
    #[error("could not draw a connected graph in {0} attempts")]
    CannotConnect(usize),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("SEM is unstable: spectral radius {0:.4} >= 1")]
    UnstableSem(f64),
    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("sample covariance is singular")]
    SingularCovariance,
    #[error("maximum-likelihood estimate does not exist for a singular covariance with lambda = 0")]
    NoMle,
    #[error("input covariance is singular")]
    SingularInputCovariance,
    #[error("problem too large for exhaustive search: n = {n} > {max}")]
    TooLarge { n: usize, max: usize },
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
