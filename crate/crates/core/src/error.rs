use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("matrix is not positive semidefinite (factorization failed with jitter {jitter:e})")]
    NotPositiveSemidefinite { jitter: f64 },

    #[error("invalid program: {0}")]
    InvalidProgram(String),

    #[error("convex solver failed: {0}")]
    SolverFailure(String),

    #[error("dual certificate check failed: {0}")]
    Certificate(String),

    #[error("branch-and-bound node limit {limit} reached")]
    NodeLimit {
        limit: usize,
        /// Best integer point found before the limit, with its master value.
        incumbent: Option<(Vec<bool>, f64)>,
    },

    #[error("time limit reached")]
    TimeLimit,

    #[error("enumeration of {count} supports exceeds the budget of {budget}")]
    BudgetExceeded { count: u128, budget: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;
