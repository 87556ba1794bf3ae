use thiserror::Error;

use crate::graph::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {}", .0.summary())]
    InvalidGraph(Box<ValidationReport>),

    #[error("invalid cycle law: {0}")]
    InvalidLaw(String),

    #[error("operation needs both jump signs to carry mass")]
    OneSidedLaw,

    #[error("graph is not (source, sink)-minimal")]
    NotMinimal,

    #[error("graph support is not symmetric")]
    AsymmetricSupport,

    #[error("linear system is singular or ill-conditioned at lambda = {lambda}")]
    SingularSystem { lambda: f64 },

    #[error("argument outside of the admissible domain: {0}")]
    DomainError(String),

    #[error("no sign change found while bracketing: {0}")]
    BracketFailure(String),

    #[error("eigen-solver did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("simulation exceeded the step cap of {cap} jumps")]
    RunawaySimulation { cap: u64 },

    #[error("query time {t} is beyond the simulated horizon {horizon}")]
    OutOfHorizon { t: f64, horizon: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("grid is not symmetric about zero")]
    AsymmetricGrid,

    #[error("curves have no overlapping abscissae")]
    NoOverlap,

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input files or arguments rather than by
    /// the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidGraph(_)
                | Error::InvalidLaw(_)
                | Error::OneSidedLaw
                | Error::NotMinimal
                | Error::AsymmetricSupport
                | Error::DomainError(_)
                | Error::InsufficientSamples(_)
                | Error::AsymmetricGrid
                | Error::NoOverlap
                | Error::OutOfHorizon { .. }
                | Error::Io(_)
                | Error::Json(_)
        )
    }

    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidGraph(_) => "invalid_graph",
            Error::InvalidLaw(_) => "invalid_law",
            Error::OneSidedLaw => "one_sided_law",
            Error::NotMinimal => "not_minimal",
            Error::AsymmetricSupport => "asymmetric_support",
            Error::SingularSystem { .. } => "singular_system",
            Error::DomainError(_) => "domain_error",
            Error::BracketFailure(_) => "bracket_failure",
            Error::NonConvergence { .. } => "non_convergence",
            Error::RunawaySimulation { .. } => "runaway_simulation",
            Error::OutOfHorizon { .. } => "out_of_horizon",
            Error::InsufficientSamples(_) => "insufficient_samples",
            Error::AsymmetricGrid => "asymmetric_grid",
            Error::NoOverlap => "no_overlap",
            Error::Inconsistent(_) => "inconsistent",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
