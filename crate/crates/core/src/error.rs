use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite {variable} in {tank} tank at t = {time:.5} d")]
    NonFinite { tank: &'static str, variable: &'static str, time: f64 },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("gradient cache does not belong to this network")]
    StaleCache,

    #[error("non-finite {what} during training at step {step}")]
    Diverged { what: &'static str, step: usize },

    #[error("missing normalization bounds for {0}")]
    MissingBounds(&'static str),

    #[error("horizon mismatch: {0} vs {1} intervals")]
    HorizonMismatch(usize, usize),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("TOML error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
