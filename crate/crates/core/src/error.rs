use thiserror::Error;

use crate::grid::GridFunction;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no convergence after {iterations} iterations (energy {energy:.12e}, residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        energy: f64,
        residual: f64,
        last: Box<GridFunction>,
    },

    #[error("tensor grid needs {required} points but the budget is {budget}; lower n or raise the budget")]
    BudgetExceeded { required: usize, budget: usize },

    #[error("singular matching: u'(R) vanishes at R = {radius}")]
    SingularMatching { radius: f64 },

    #[error("non-finite state in trajectory {trajectory} at step {step}")]
    NonFiniteState { trajectory: usize, step: usize },

    #[error("degenerate sampling envelope: density vanishes identically")]
    DegenerateEnvelope,

    #[error("empty sample window")]
    EmptyWindow,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
