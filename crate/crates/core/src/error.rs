use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("unknown vertex id {0}")]
    UnknownVertex(usize),

    #[error("invalid growth profile: {0}")]
    InvalidProfile(String),

    #[error("invalid increment law: {0}")]
    InvalidLaw(String),

    #[error("invalid boundary: {0}")]
    InvalidBoundary(String),

    #[error("invalid gauge: {0}")]
    InvalidGauge(String),

    #[error("invalid target set: {0}")]
    InvalidTarget(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("moment generating function of {0} diverges on [0, 1]")]
    DivergentMgf(String),

    #[error("state space too large: about {estimate} states (budget {budget})")]
    StateSpaceTooLarge { estimate: usize, budget: usize },

    #[error("{law} must be quantized onto a lattice first (set the `quantize` option)")]
    NeedsQuantization { law: String },

    #[error("exact arithmetic unavailable: {0}")]
    NotExact(String),

    #[error("zero marginal probability at level {0}")]
    ZeroMarginal(usize),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
