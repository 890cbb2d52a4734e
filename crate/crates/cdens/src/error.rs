use thiserror::Error;

/// Errors produced by estimation, bandwidth selection, and simulation.
#[derive(Error, Debug)]
pub enum Error {
    #[error("failed to read data file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error in {path}: {message}")]
    Csv { path: String, message: String },

    #[error("column '{column}' not found in header")]
    MissingColumn { column: String },

    #[error("non-numeric or non-finite value in row {row}, column '{column}'")]
    BadCell { row: usize, column: String },

    #[error("dataset invalid: {0}")]
    InvalidData(String),

    #[error("configuration invalid: {0}")]
    InvalidConfig(String),

    #[error("insufficient local data at {context}")]
    InsufficientLocalData { context: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("option not implemented: {0}")]
    NotImplemented(String),
}

impl Error {
    pub(crate) fn insufficient(context: impl Into<String>) -> Self {
        Error::InsufficientLocalData {
            context: context.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
