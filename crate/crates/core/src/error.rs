use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("probability entry {index} is negative ({value})")]
    NegativeMass { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, expected 1 within {tolerance}")]
    NotNormalized { sum: f64, tolerance: f64 },

    #[error("index {index} outside output space of size {size}")]
    IndexOutOfSpace { index: usize, size: usize },

    #[error("safe and unsafe sets must partition the output space")]
    BadPartition,

    #[error("response has zero probability under every model")]
    ZeroMixtureMass,

    #[error("trace selection requires a non-empty buffer")]
    EmptyBuffer,

    #[error(
        "safe-set floor {floor} unreachable from base with safe mass {base_mass} and jitter {jitter}"
    )]
    InfeasibleFloor {
        floor: f64,
        base_mass: f64,
        jitter: f64,
    },

    #[error("collusion requires a non-empty unsafe set")]
    EmptyUnsafeSet,

    #[error("exclusions leave fewer than two usable models")]
    GroupExhausted,

    #[error("instance too large for exhaustive enumeration (need |Y| <= {max_space}, R <= {max_rounds})")]
    TooLarge { max_space: usize, max_rounds: usize },

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
