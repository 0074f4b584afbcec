use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the numerical layer can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("row {row} of the kernel is not stochastic (sum {sum}, min entry {min})")]
    NonStochastic { row: usize, sum: f64, min: f64 },
    #[error("linear system is numerically singular at pivot {pivot}")]
    SingularSolve { pivot: usize },
    #[error("target set covers every state")]
    EmptyComplement,
    #[error("target set is empty or has an index above {n}")]
    InvalidTarget { n: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("argument outside the domain: {0}")]
    DomainError(String),
    #[error("generating function has a pole: factor denominator {denominator} at x = {x}")]
    PoleError { x: f64, denominator: f64 },
    #[error("inclusion-exclusion limited to n <= {limit}, got n = {n}")]
    SubsetLimit { n: usize, limit: usize },
    #[error("PGF denominator is nonpositive ({denominator}) at z = {z}")]
    DenominatorNonpositive { z: f64, denominator: f64 },
    #[error("parameters contradict the regime: {0}")]
    RegimeMismatch(String),
    #[error("step budget of {budget} exceeded")]
    BudgetExceeded { budget: u64 },
    #[error("need at least {needed} uncensored samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sweep plan has an empty grid")]
    EmptyGrid,
}

impl Error {
    /// Stable short name, used by the CLI when reporting numerical failures.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NonStochastic { .. } => "NonStochastic",
            Error::SingularSolve { .. } => "SingularSolve",
            Error::EmptyComplement => "EmptyComplement",
            Error::InvalidTarget { .. } => "InvalidTarget",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::DomainError(_) => "DomainError",
            Error::PoleError { .. } => "PoleError",
            Error::SubsetLimit { .. } => "SubsetLimit",
            Error::DenominatorNonpositive { .. } => "DenominatorNonpositive",
            Error::RegimeMismatch(_) => "RegimeMismatch",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::EmptyGrid => "EmptyGrid",
        }
    }
}
