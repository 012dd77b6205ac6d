use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Clone, Debug, Error)]
pub enum Error {
    /// Malformed group, tower, operator or class specification.
    #[error("parse error: {0}")]
    Parse(String),

    /// An enumeration ran past its configured budget.
    #[error("budget exceeded: {what} (limit {limit}, reached radius {reached_radius})")]
    Budget {
        what: String,
        limit: usize,
        reached_radius: u32,
    },

    /// An analytic precondition (spectral gap, invertibility) failed.
    #[error("precondition violated: {0}")]
    Gap(String),

    /// Input outside an operation's domain.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The operation is not available for this group or operator.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical procedure failed its own consistency check.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
