use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("bin count {bins} does not divide dimension {dim}; pad the dimension to {padded} (CLI: --pad)")]
    Divisibility { dim: u32, bins: u32, padded: u32 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("every slot of the signature is EMPTY")]
    DegenerateSignature,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numerics error: {0}")]
    Numerics(String),

    #[error("vector has {nnz} nonzeros but the privacy budget assumes at least {f_min}")]
    BudgetViolation { nnz: usize, f_min: u32 },

    #[error("keep probability {p_keep} does not exceed chance level 1/2^{bits}")]
    DegenerateBudget { p_keep: f64, bits: u8 },

    #[error("signatures are not comparable: {0}")]
    Comparability(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerics(_) => 3,
            Error::BudgetViolation { .. } => 4,
            _ => 2,
        }
    }
}
