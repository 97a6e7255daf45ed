use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("at least {required} chains are required, got {got}")]
    InsufficientChains { required: usize, got: usize },
    #[error("degenerate chain: {0}")]
    DegenerateChain(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid sampler state: {0}")]
    InvalidState(String),
    #[error("initialization failed: {0}")]
    Initialization(String),
}
