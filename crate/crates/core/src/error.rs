use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid channel: {0}")]
    Channel(String),
    #[error("search space too large: {size} candidates exceeds cap {cap}")]
    SearchSpace { size: u128, cap: u128 },
    #[error("frame too small: {0}")]
    FrameTooSmall(String),
    #[error("channel estimate failed: no taps above threshold")]
    EstimateFailure,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no non-overlapping CDDS plan in the search window (best plan keeps {} distinct effective paths)", .0.union_size)]
    InfeasiblePlan(Box<crate::cdds::PlannedSteps>),
    #[error("not enough usable points for slope fit ({0} < 2)")]
    TooFewPoints(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
