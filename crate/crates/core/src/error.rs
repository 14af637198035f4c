use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degree {degree} has negative mass {mass}")]
    NegativeMass { degree: usize, mass: f64 },

    #[error("distribution mass sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("distribution has no degrees")]
    EmptyDistribution,

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unsupported scenario: {0}")]
    UnsupportedScenario(String),

    #[error("scenario is infeasible: {0}")]
    InfeasibleScenario(String),

    #[error("simplex failed to make progress: {0}")]
    NumericalFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
