use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("communication graph is disconnected")]
    Disconnected,

    #[error("communication graph has a single node, algebraic connectivity is undefined")]
    SingleNode,

    #[error("Jacobi eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("step size violates the feasibility condition (lhs = {lhs})")]
    InfeasibleStepSize { lhs: f64 },

    #[error("agent {agent} has no local-update budget left this period")]
    BudgetExhausted { agent: usize },

    #[error("no agent participated in the period")]
    NoParticipants,

    #[error("parameters diverged at iteration {k} (last finite aggregation at k = {last_finite_k})")]
    Diverged { k: usize, last_finite_k: usize },

    #[error("run record has no rows")]
    EmptyRecord,
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
