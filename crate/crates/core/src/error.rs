use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("input density rejected: {0}")]
    Input(String),

    #[error("outside the valid domain: {0}")]
    Domain(String),

    #[error("y = {y} is in the far tail; usable range is [{lo}, {hi}]")]
    Tail { y: f64, lo: f64, hi: f64 },

    #[error("regularity condition fails: {0}")]
    Regularity(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("{what} did not converge (best estimate {estimate}, error {abs_error})")]
    Convergence {
        what: String,
        estimate: f64,
        abs_error: f64,
    },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("non-finite value at x = {at}")]
    Evaluation { at: f64 },

    #[error("identity check failed: {0}")]
    IdentityViolation(String),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 1,
            Error::Parameter(_)
            | Error::Input(_)
            | Error::Domain(_)
            | Error::Tail { .. }
            | Error::Regularity(_)
            | Error::Unsupported(_) => 2,
            Error::Convergence { .. }
            | Error::Resolution(_)
            | Error::DegenerateSample(_)
            | Error::Evaluation { .. } => 3,
            Error::IdentityViolation(_) => 4,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
