use thiserror::Error;

/// Errors produced by the samplers, the constraint engines and the CLI layer.
#[derive(Debug, Error)]
pub enum Error {
    /// A distribution parameter violates its domain (e.g. a non-positive scale).
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// A function argument is outside the accepted domain.
    #[error("argument out of domain: {0}")]
    Domain(String),

    /// A truncated draw was requested on an interval without probability mass.
    #[error("interval ({lo}, {hi}) carries no probability mass")]
    InfeasibleInterval { lo: f64, hi: f64 },

    /// The latent vector could not be initialised under the starting parameters.
    #[error("initialization failed: {0}")]
    Initialization(String),

    /// Invalid user configuration (constraints, priors, run settings).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A diagnostic could not be computed (e.g. the chain is too short).
    #[error("diagnostics: {0}")]
    Diagnostics(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that signal an infeasible model rather than a usage mistake.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleInterval { .. } | Error::Initialization(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
