use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input value is NaN or infinite.
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    /// A parameter set violates one of the model invariants.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A state component is negative beyond the floating-point drift allowance.
    #[error("state component `{name}` is negative ({value:e})")]
    NegativeState { name: &'static str, value: f64 },

    /// A bound that divides by a vanishing rate.
    #[error("bound undefined: {0}")]
    UndefinedBound(&'static str),

    /// A closed form whose denominator vanishes for this parameter set.
    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    /// Integration produced a non-finite value.
    #[error("integration blew up at t = {time}")]
    BlowUp { time: f64 },

    /// Shapes or grids of the arguments do not line up.
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;
