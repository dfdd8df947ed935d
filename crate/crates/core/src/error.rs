use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "vertex budget exceeded: radius {radius} needs {required} vertices, budget is {budget}"
    )]
    BudgetExceeded {
        radius: usize,
        required: u128,
        budget: usize,
    },

    #[error("quadrature did not converge: estimate {value:e}, error {error:e}, tolerance {tolerance:e}")]
    Quadrature {
        value: f64,
        error: f64,
        tolerance: f64,
    },

    #[error("truncation insufficient: {0}")]
    Truncation(String),

    #[error("linear solve failed: {0}")]
    Singular(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical method to reach its tolerance, as
    /// opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. } | Error::Truncation(_) | Error::Singular(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
