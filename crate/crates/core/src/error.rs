use thiserror::Error;

/// Errors raised by the library. Every variant is a domain error: the input
/// was well formed but violates a precondition of the requested operation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mass at index {index} is negative ({value})")]
    NegativeMass { index: usize, value: f64 },

    #[error("mass at index {index} is not finite")]
    NonFiniteMass { index: usize },

    #[error("masses sum to {sum}, not 1")]
    MassSumMismatch { sum: f64 },

    #[error("{labels} labels supplied for {masses} masses")]
    LabelMismatch { masses: usize, labels: usize },

    #[error("invalid tail model: {0}")]
    InvalidTail(String),

    #[error("tail model interleaves with the explicit masses; truncate first")]
    UnsortableTail,

    #[error("tail needs more than {cap} explicit terms to meet the tolerance")]
    TailNotSummable { cap: usize },

    #[error("operation not supported for this tail model: {0}")]
    UnsupportedTail(String),

    #[error("eps = {eps} outside the feasible range [{lo}, {hi}]")]
    Infeasible { eps: f64, lo: f64, hi: f64 },

    #[error("eps = {eps} outside [0, {hi}]")]
    EpsOutOfRange { eps: f64, hi: f64 },

    #[error("decoding range must contain at least one symbol")]
    ZTooSmall,

    #[error("decoding range has {got} symbols, expected {expected}")]
    BadZCardinality { expected: usize, got: usize },

    #[error("the index K is infinite")]
    KInfinite,

    #[error("functional {0} is not concave")]
    NonConcavePhi(String),

    #[error("phi(Q) is infinite while eps > 0")]
    PhiInfinite,

    #[error("delta = {delta} outside [0, {max}]")]
    DeltaOutOfRange { delta: f64, max: f64 },

    #[error("source does not majorize target (prefix {witness} fails)")]
    NotMajorized { witness: usize },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("sharpness conditions unmet: {0}")]
    ConditionsUnmet(String),

    #[error("|Y| = {n} is below the required {required}")]
    YTooSmall { n: usize, required: u64 },

    #[error("mesh too large: {0}")]
    MeshTooLarge(String),

    #[error("bisection failed: {0}")]
    BisectionFailure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    /// Stable variant name used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NegativeMass { .. } => "NegativeMass",
            Error::NonFiniteMass { .. } => "NonFiniteMass",
            Error::MassSumMismatch { .. } => "MassSumMismatch",
            Error::LabelMismatch { .. } => "LabelMismatch",
            Error::InvalidTail(_) => "InvalidTail",
            Error::UnsortableTail => "UnsortableTail",
            Error::TailNotSummable { .. } => "TailNotSummable",
            Error::UnsupportedTail(_) => "UnsupportedTail",
            Error::Infeasible { .. } => "Infeasible",
            Error::EpsOutOfRange { .. } => "EpsOutOfRange",
            Error::ZTooSmall => "ZTooSmall",
            Error::BadZCardinality { .. } => "BadZCardinality",
            Error::KInfinite => "KInfinite",
            Error::NonConcavePhi(_) => "NonConcavePhi",
            Error::PhiInfinite => "PhiInfinite",
            Error::DeltaOutOfRange { .. } => "DeltaOutOfRange",
            Error::NotMajorized { .. } => "NotMajorized",
            Error::NumericalBreakdown(_) => "NumericalBreakdown",
            Error::ConditionsUnmet(_) => "ConditionsUnmet",
            Error::YTooSmall { .. } => "YTooSmall",
            Error::MeshTooLarge(_) => "MeshTooLarge",
            Error::BisectionFailure(_) => "BisectionFailure",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Parse(_) => "Parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
