use thiserror::Error;

use crate::cli::config::ConfigIssue;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numeric range: {0}")]
    NumericRange(String),

    #[error("spectral gap is undefined for a single-state system")]
    UndefinedGap,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("p_error cap violated: dbeta * max E = {value} (must be < 1)")]
    PErrorCap { value: f64 },

    #[error(
        "dilated space needs {amplitudes} amplitudes, over the budget of {budget}; \
         use the weight method (run_qja) instead"
    )]
    Resource { amplitudes: u128, budget: u128 },

    #[error("state vector has zero norm")]
    ZeroVector,

    #[error("post-selected branch has exactly zero amplitude")]
    ZeroProbability,

    #[error("post-selected branch has nonzero amplitudes but its probability underflows")]
    ProbabilityUnderflow,

    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration:\n{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_step(step: usize) -> impl FnOnce(Error) -> Error {
        move |e| Error::AtStep {
            step,
            source: Box::new(e),
        }
    }

    /// Errors that come from floating-point range or convergence limits
    /// rather than from bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NumericRange(_)
            | Error::NoConvergence { .. }
            | Error::ProbabilityUnderflow
            | Error::ZeroProbability
            | Error::ZeroVector
            | Error::PErrorCap { .. } => true,
            Error::AtStep { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}
