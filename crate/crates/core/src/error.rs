use thiserror::Error;

/// Errors surfaced while validating inputs, building partitions, or running chains.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The hazard nonnegativity constraint is violated where an operation requires it.
    #[error("constraint violated: {0}")]
    Constraint(String),

    /// Model or prior configuration is inconsistent with the data.
    #[error("configuration error: {0}")]
    Config(String),

    /// A delimited input file failed validation.
    #[error("ingestion error at row {row}: {message}")]
    Ingestion { row: usize, message: String },

    /// The time partition cannot be built or does not cover the data.
    #[error("partition error: {0}")]
    Partition(String),

    /// The sampler could not construct an admissible starting state.
    #[error("initialization error: {0}")]
    Init(String),

    /// A query time lies beyond the last partition cut point.
    #[error("extrapolation error: {0}")]
    Extrapolation(String),

    /// An output artifact failed schema validation on reread.
    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
