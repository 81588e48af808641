use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid scenario: {0}")]
    Invalid(&'static str),
    #[error("retry stage {stage} out of range 0..={m}")]
    StageOutOfRange { stage: u32, m: u32 },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("config parse error: {0}")]
    Parse(String),
}

/// An argument outside the domain of a closed-form expression.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{what}: {detail}")]
pub struct DomainError {
    pub what: &'static str,
    pub detail: String,
}

impl DomainError {
    pub(crate) fn new(what: &'static str, detail: impl Into<String>) -> Self {
        DomainError {
            what,
            detail: detail.into(),
        }
    }
}

/// One row of solver history: `(tau, p_f, p_q)` after an outer pass.
pub type Iterate = (f64, f64, f64);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("solver options invalid: {0}")]
    Options(&'static str),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<Iterate>,
    },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

impl From<DomainError> for SolverError {
    fn from(e: DomainError) -> Self {
        SolverError::DegenerateInput(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("invalid chain spec: {0}")]
    Spec(String),
    #[error("chain is reducible: {0}")]
    Reducible(String),
    #[error("stationary solve failed: {0}")]
    Solve(String),
}
