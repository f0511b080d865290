use thiserror::Error;

pub type Result<T> = std::result::Result<T, KrdError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KrdError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("spectral field violates Hermitian symmetry (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid exponent {0}")]
    InvalidExponent(f64),
    #[error("invalid axis {axis} for dimension {d}")]
    InvalidAxis { axis: usize, d: usize },
    #[error("zero lattice vector has no partition sign or hyperplane")]
    ZeroWavevector,
    #[error("invalid noise spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("noise support |k_j| <= {max_k} is not resolved by n = {n}")]
    UnderResolved { max_k: i64, n: usize },
    #[error("invalid reaction: {0}")]
    InvalidReaction(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("subcriticality violated: {0}")]
    Subcritical(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("snapshot format error: {0}")]
    Snapshot(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for KrdError {
    fn from(e: std::io::Error) -> Self {
        KrdError::Io(e.to_string())
    }
}
