use std::path::PathBuf;

use thiserror::Error;

/// Failure modes across the pipeline.
///
/// Most variants describe bad input data or parameters; callers such as the
/// CLI map them to a "validation" exit status. `Io` and `Json` can be either.
#[derive(Error, Debug)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("column {column} cannot be imputed: every value is missing")]
    UnimputableColumn { column: String },

    #[error("insufficient minority rows: need at least {required}, got {actual}")]
    InsufficientMinority { required: usize, actual: usize },

    #[error("resample error: {0}")]
    Resample(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("infeasible feature mask: {0}")]
    InfeasibleMask(String),

    #[error("degenerate population: {0}")]
    DegeneratePopulation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("dataset is not fully numeric: {0}")]
    NotNumeric(String),

    #[error("{phase} phase failed: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the pipeline phase it came from.
    pub fn in_phase(self, phase: &'static str) -> Self {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }

    /// Innermost error with phase wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Phase { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
