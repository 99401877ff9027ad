use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid elevation grid: {0}")]
    InvalidGrid(String),

    #[error("steering matrix of {rows}x{cols} exceeds the cap of {cap} entries")]
    DimensionOverflow {
        rows: usize,
        cols: usize,
        cap: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("ill-conditioned system: {0} (consider increasing noise_floor)")]
    IllConditioned(String),

    #[error("invalid solver options: {0}")]
    InvalidOptions(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error(transparent)]
    Config(#[from] crate::experiment::config::ConfigError),

    #[error("malformed measurement file at record {record}: {message}")]
    MalformedInput { record: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
