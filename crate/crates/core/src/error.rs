use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The sum of squares vanished where a statistic needs it positive.
    #[error("configuration has T = 0; the statistic is undefined")]
    ZeroNorm,

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("state space too large for enumeration: {states} states (limit {limit})")]
    StateSpaceTooLarge { states: f64, limit: f64 },

    #[error("measure {0} does not have finite support")]
    NotFiniteSupport(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("distribution is not normalized (total mass {0})")]
    Unnormalized(f64),

    #[error("probability {0} outside (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("measure {0} does not satisfy the sub-Gaussian integrability condition")]
    ConditionStarFails(String),

    #[error("quadrature did not converge on [{a}, {b}]")]
    QuadratureNonConvergence { a: f64, b: f64 },

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
