use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input or parameter dimensions disagree.
    #[error("shape mismatch in {context}: expected {expected}, got {found}")]
    Shape {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    /// The normal equations could not be factored even after jitter.
    #[error("linear solver failed: {0}")]
    Solver(String),

    /// Heuristic regression returned an all-zero weight vector; the caller
    /// must fall back (intercept-only neuron or stop growing).
    #[error("hyperplane fit produced an all-zero weight vector")]
    ZeroWeights,

    #[error("training aborted: {0}")]
    TrainingAborted(String),

    #[error("unsupported model file version {0}")]
    UnknownVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::Shape {
            context: context.into(),
            expected,
            found,
        }
    }
}
