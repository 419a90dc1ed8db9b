use thiserror::Error;

/// Errors produced by the solvers and domain constructors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no root of {what} in bracket [{lo}, {hi}]")]
    NoRoot {
        what: &'static str,
        lo: f64,
        hi: f64,
    },

    #[error("{what} did not converge after {iters} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iters: usize,
        residual: f64,
    },

    #[error("enumeration budget exceeded: {count} partitions > budget {budget}")]
    BudgetExceeded { count: u128, budget: u128 },

    #[error("no partition entropy within {tol} of beta = {beta} (nearest below: {below:?}, above: {above:?})")]
    NoPointNearBeta {
        beta: f64,
        tol: f64,
        below: Option<f64>,
        above: Option<f64>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
