use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e} exceeds {tolerance:.0e})")]
    Asymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive definite: pivot {pivot} has value {value:.6e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("{context}: condition number {condition:.3e} exceeds {limit:.0e}")]
    IllConditioned {
        context: String,
        condition: f64,
        limit: f64,
    },

    #[error("no source tasks: the hyper-mean posterior needs at least one source task")]
    NoSourceTasks,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("enumeration needs {outcomes} outcomes, budget is {budget}")]
    Budget { outcomes: u128, budget: u128 },

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// True for failures caused by the numbers themselves rather than by the
    /// shape or validity of the request.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::Singular(_)
                | Error::IllConditioned { .. }
                | Error::Asymmetric { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
