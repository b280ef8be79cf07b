use thiserror::Error;

pub type Result<T, E = SpreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpreError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("design is not unisolvent for the index set")]
    NotUnisolvent,

    #[error("expected exactly {expected} design points, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("Gram matrix is not positive definite")]
    GramNotPositiveDefinite,

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("convergence scaling vanishes at training point {index}")]
    DegenerateScaling { index: usize },

    #[error("posterior variance is zero")]
    ZeroVariance,

    #[error("need at least {needed} data points, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("leave-one-out fold {0} is not unisolvent")]
    FoldNotUnisolvent(usize),

    #[error("no candidate design fits within the budget")]
    EmptyProposal,

    #[error("width {0} is not the reciprocal of a positive integer")]
    InvalidWidth(f64),

    #[error("cost undefined at a point with a zero coordinate")]
    ZeroCoordinate,

    #[error("no cost recorded for point {0:?}")]
    MissingCost(Vec<f64>),

    #[error("agents {i} and {j} coincide")]
    CoincidentAgents { i: usize, j: usize },

    #[error("unknown reference design `{0}`")]
    UnknownDesign(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl SpreError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SpreError::InvalidInput(msg.into())
    }
}

impl From<std::io::Error> for SpreError {
    fn from(e: std::io::Error) -> Self {
        SpreError::Io(e.to_string())
    }
}

impl From<csv::Error> for SpreError {
    fn from(e: csv::Error) -> Self {
        SpreError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for SpreError {
    fn from(e: serde_json::Error) -> Self {
        SpreError::Io(e.to_string())
    }
}
