use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Requested an operation the kernel has no closed form for.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("moment of order {order} diverges for decay exponent {exponent} (need order < exponent - 1)")]
    DivergentMoment { order: f64, exponent: f64 },

    #[error("kernel '{0}' is not integrable: decay exponent must exceed 1")]
    NonIntegrable(String),

    #[error("quadrature did not reach tolerance {requested:e} (best estimate {achieved:e})")]
    QuadratureNonConvergence { requested: f64, achieved: f64 },

    #[error("truncation needs {needed} terms, budget is {budget}")]
    TruncationBudget { needed: u64, budget: u64 },

    /// `exp` argument above the overflow cap; the modular is infinite at working precision.
    #[error("modular overflow: exponential argument {argument:e} exceeds cap")]
    ModularOverflow { argument: f64 },

    #[error("Luxemburg norm not bracketed: modular of f/lambda still exceeds 1 at lambda = {cap:e}")]
    NonBracketable { cap: f64 },

    #[error("grid mismatch: expected {expected} values, got {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("missing signal metadata: {0}")]
    MissingMetadata(String),

    #[error("i/o failure: {0}")]
    Io(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

impl Error {
    /// True for failures of a mathematical precondition (divergence, non-bracketable
    /// norms, missing regularity) as opposed to bad input or runtime evaluation trouble.
    pub fn is_math_precondition(&self) -> bool {
        matches!(
            self,
            Error::DivergentMoment { .. }
                | Error::NonIntegrable(_)
                | Error::NonBracketable { .. }
                | Error::MissingMetadata(_)
                | Error::DegenerateFit(_)
        )
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::Unsupported(_))
    }
}
