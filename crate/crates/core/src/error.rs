use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),

    #[error("divergence must be non-negative and not NaN, got {0}")]
    InvalidDivergence(f64),

    #[error("sample size must be at least {min}, got {n}")]
    SampleSizeTooSmall { n: u64, min: u64 },

    #[error("{what}: cost guard exceeded ({size} > {limit})")]
    CostGuard {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("{variant} bound requires n >= {min}, got n = {n}")]
    VariantGate {
        variant: &'static str,
        n: u64,
        min: u64,
    },

    #[error("{0} must be strictly inside (0, 1), got {1}")]
    OpenInterval(&'static str, f64),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invariant gate failed: {0}")]
    InvariantGate(String),
}
