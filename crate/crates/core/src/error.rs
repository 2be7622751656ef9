use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("valuation {value} lies outside the support [{lo}, {hi}]")]
    OutOfSupport { value: f64, lo: f64, hi: f64 },

    #[error("survival probability underflows at v = {0}")]
    TailDegenerate(f64),

    #[error("target virtual value {target} is outside the range [{lo}, {hi}] of the virtual value function")]
    OutOfRange { target: f64, lo: f64, hi: f64 },

    #[error("virtual value function is not monotone near v = {0}")]
    NonMonotone(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("adaptive quadrature did not converge (estimate {estimate}, error {error})")]
    QuadratureFailure { estimate: f64, error: f64 },

    #[error("expectation of order statistic ({rank}, {size}) diverges for a tail index of {tail_index}")]
    NonIntegrable { rank: usize, size: usize, tail_index: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot parse descriptor `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("claimed optimum is infeasible: {0}")]
    InfeasibleClaim(String),

    #[error("posted price depends on the demand structure: {0}")]
    RobustnessViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(input: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            input: input.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn invalid(reason: impl Into<String>) -> Self {
        Error::InvalidParameter(reason.into())
    }
}
