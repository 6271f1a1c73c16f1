use thiserror::Error;

/// Errors raised by the construction and evaluation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no point with a stable nonzero derivative found for activation `{0}`")]
    NoKLPoint(String),

    #[error("derivative at the operating point is zero")]
    ZeroDerivative,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("point of arity {arity} is incompatible with feature {feature}")]
    IncompatiblePoint { feature: String, arity: usize },

    #[error("direction {0} is zero")]
    ZeroDirection(usize),

    #[error("feature map is not injective on the sample: points {first} and {second} share an image")]
    InjectivityFailure { first: usize, second: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("duplicate points {0} and {1} in sampled set")]
    DuplicatePoint(usize, usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown activation `{0}`")]
    UnknownActivation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
