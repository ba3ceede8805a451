use alloc::string::String;

/// Errors raised by the inference and forecasting core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("index {index} out of range (valid: {valid})")]
    IndexOutOfRange { index: usize, valid: &'static str },
    #[error("observation contradicts a headway constraint (row {row}, residual {residual:.3e} s)")]
    InconsistentObservation { row: usize, residual: f64 },
    #[error("bus pair has no observed entries")]
    EmptyObservation,
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("dirichlet concentration must be finite and positive")]
    InvalidAlpha,
    #[error("probabilities do not form a simplex (sum {sum})")]
    NotASimplex { sum: f64 },
    #[error("cholesky factorization failed after jitter escalation")]
    CholeskyFailure,
    #[error("constraint system G Sigma G^T is singular{context}")]
    SingularConstraintSystem { context: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("insufficient data for coordinate {coordinate}: {reason}")]
    InsufficientData { coordinate: String, reason: &'static str },
    #[error("period {period} has no bus pairs")]
    EmptyPeriod { period: usize },
    #[error("fewer than two observed arrivals")]
    TooSparse,
    #[error("dispatch time precedes the start of the service day")]
    OutOfWindow,
    #[error("unknown bus {0}")]
    UnknownBus(String),
    #[error("trip is complete; nothing to forecast")]
    NothingToForecast,
    #[error("leading bus has upcoming links but no forecast was supplied")]
    MissingLeadingForecast,
    #[error("stop range {j1}..{j2} is not covered by observed and forecast links")]
    RangeError { j1: usize, j2: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("truth value at index {index} is zero")]
    ZeroTruth { index: usize },
    #[error("at least {needed} samples required, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("component counts differ: {left} vs {right}")]
    KMismatch { left: usize, right: usize },
}

impl Error {
    /// Attaches a pair identifier to a singular-system error.
    pub fn with_pair(self, pair_id: &str) -> Self {
        match self {
            Error::SingularConstraintSystem { .. } => Error::SingularConstraintSystem {
                context: alloc::format!(" for pair {pair_id}"),
            },
            other => other,
        }
    }

    pub(crate) fn singular() -> Self {
        Error::SingularConstraintSystem { context: String::new() }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
