use thiserror::Error;

/// Errors raised while validating inputs or assembling relaxations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {field}: {message}")]
    InvalidNetwork { field: String, message: String },

    #[error("zero-impedance branch {index} ({from}-{to})")]
    ZeroImpedance { index: usize, from: usize, to: usize },

    #[error("dimension mismatch: expected {expected} variables, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "relaxation order {order} too small for a degree-{degree} polynomial; \
         the order must be greater than or equal to half the highest degree"
    )]
    OrderTooLow { order: usize, degree: usize },

    #[error("unsupported relaxation order {0} (expected 1, 2 or 3)")]
    UnsupportedOrder(usize),

    #[error("bus {0} has no generator")]
    NoGenerator(usize),

    #[error("negative quadratic cost coefficient c2 = {c2} at bus {bus}")]
    NonConvexCost { bus: usize, c2: f64 },

    #[error("penalty coefficient must be non-negative, got {0}")]
    NegativePenalty(f64),

    #[error("reactive penalty is only defined for the first-order relaxation")]
    PenaltyRequiresFirstOrder,

    #[error("rank condition not satisfied (eigenvalue ratio {ratio:.3e}); refusing to extract voltages")]
    RankConditionUnmet { ratio: f64 },

    #[error("no solution available: {0}")]
    NoSolution(String),

    #[error("invalid argument: {field}: {message}")]
    InvalidArgument { field: String, message: String },

    #[error("worker pool: {0}")]
    Pool(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn network(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidNetwork {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn argument(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field: field.into(),
            message: message.into(),
        }
    }
}
