use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic in {path}: expected {expected:?}")]
    BadMagic { path: PathBuf, expected: &'static str },

    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    TruncatedPayload {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("unknown stream code {0}")]
    UnknownStream(u32),

    #[error("non-finite value at flat index {index}")]
    NonFiniteValue { index: usize },

    #[error("clip count mismatch: rgb has {rgb} clips, flow has {flow}")]
    ClipCountMismatch { rgb: usize, flow: usize },

    #[error("expected a {expected} tensor, got {found}")]
    WrongStream {
        expected: &'static str,
        found: &'static str,
    },

    #[error("tensor has no clips")]
    EmptyTensor,

    #[error("invalid tensor shape: {0}")]
    InvalidShape(String),

    #[error("manifest {path}, line {line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("trace does not match network: {0}")]
    TraceMismatch(String),

    #[error("non-finite parameter in {0} after update")]
    NonFiniteParameter(&'static str),

    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("bag is empty")]
    EmptyBag,

    #[error("batch is empty")]
    EmptyBatch,

    #[error("invalid objective config: {0}")]
    InvalidObjective(String),

    #[error("shape mismatch in parameter tensor {index}: params {params}, grads {grads}")]
    ShapeMismatch {
        index: usize,
        params: usize,
        grads: usize,
    },

    #[error("non-finite gradient in parameter tensor {index}")]
    NonFiniteGradient { index: usize },

    #[error("optimizer is {actual}, cannot apply a {requested} step")]
    OptimizerKind {
        actual: &'static str,
        requested: &'static str,
    },

    #[error("insufficient bags: need {needed} of label {label}, have {available}")]
    InsufficientBags {
        label: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("non-finite loss at iteration {iteration}: total={total}")]
    NonFiniteLoss { iteration: usize, total: f64 },

    #[error("degenerate labels: {positives} positive and {negatives} negative frames")]
    DegenerateLabels { positives: usize, negatives: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
