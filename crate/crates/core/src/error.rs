use thiserror::Error;

/// Errors produced by the decomposition library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("mode {mode} out of range for a {order}-way tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("index {index:?} out of range for dims {dims:?}")]
    IndexOutOfRange { index: Vec<usize>, dims: Vec<usize> },

    #[error("invalid permutation {0:?}")]
    InvalidPermutation(Vec<usize>),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("modes {modes:?} share cell {cell} but have sizes {sizes:?}")]
    CellDimensionMismatch {
        cell: usize,
        modes: Vec<usize>,
        sizes: Vec<usize>,
    },

    #[error("duplicate sparse index {0:?}")]
    DuplicateIndex(Vec<usize>),

    #[error("loss `{loss}` undefined at model value {value} (index {index:?})")]
    Domain {
        loss: String,
        value: f64,
        index: Vec<usize>,
    },

    #[error("loss `{name}` failed the derivative check at x={x}, m={m}: analytic {analytic}, numeric {numeric}")]
    InconsistentLoss {
        name: String,
        x: f64,
        m: f64,
        analytic: f64,
        numeric: f64,
    },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("data tensor is not symmetric with respect to the partition (deviation {deviation:e})")]
    NotSymmetric { deviation: f64 },

    #[error("zero-entry rejection sampling exhausted {iters} draws; tensor too dense for stratified sampling")]
    RejectionBudget { iters: usize },

    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLength { got: usize, expected: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by bad user input (files, configs, partitions) as
    /// opposed to failures while computing.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidPartition(_)
                | Error::CellDimensionMismatch { .. }
                | Error::Config(_)
                | Error::Parse { .. }
                | Error::DuplicateIndex(_)
                | Error::InvalidWeights(_)
                | Error::InvalidPermutation(_)
                | Error::Shape(_)
                | Error::NotSymmetric { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
