use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("PLY parse error at byte {offset}: {message}")]
    Ply { offset: usize, message: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("missing attribute: {0}")]
    MissingAttribute(&'static str),

    #[error("image too small for {metric}: needs at least {min_side} px per side, got {width}x{height}")]
    ImageTooSmall {
        metric: String,
        min_side: usize,
        width: usize,
        height: usize,
    },

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("missing reference rating for {0}")]
    MissingReference(String),

    #[error("unbalanced design: {0}")]
    Unbalanced(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical routine rather than bad input data.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::ZeroVariance(_) | Error::Numerical(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
