use thiserror::Error;

/// Errors raised by the numerical and algorithmic layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BanditError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is singular or indefinite (min eigenvalue {min_eigenvalue:e})")]
    SingularOrIndefinite { min_eigenvalue: f64 },

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("action set must contain at least one action")]
    EmptyActionSet,

    #[error("context store is empty")]
    EmptyStore,

    #[error("round index {0} is out of range for this schedule")]
    InvalidRound(u64),

    #[error("loss {0} is outside [-1, 1]")]
    LossOutOfRange(f64),

    #[error("select() called twice without an intervening update()")]
    PendingRound,

    #[error("update() called without a preceding select()")]
    NoPendingRound,

    #[error("policy set is empty")]
    EmptyPolicySet,

    #[error("policy net would contain {size} policies, above the cap of {cap}")]
    PolicyNetTooLarge { size: u128, cap: u128 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("mismatched lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

pub type Result<T> = std::result::Result<T, BanditError>;
