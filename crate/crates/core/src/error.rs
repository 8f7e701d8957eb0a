use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("two-point state is on the diagonal (separation {0:e})")]
    Diagonal(f64),
    #[error("separation underflow at step {step}: {separation:e}")]
    SeparationUnderflow { step: usize, separation: f64 },
    #[error("degenerate tangent vector at step {0}")]
    DegenerateTangent(usize),
    #[error("cocycle product of length {0} exceeds the overflow guard of {1}")]
    CocycleTooLong(usize, usize),
    #[error("target unreachable in one step: required increment {required} exceeds K = {k}")]
    Unreachable { required: f64, k: f64 },
    #[error("field is not mean-zero (|rho_0| = {0:e})")]
    NotMeanZero(f64),
    #[error("nonpositive value {value} at index {index}")]
    NonPositive { index: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
