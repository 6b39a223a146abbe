use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate or clockwise element (signed area {signed_area:e})")]
    DegenerateElement { signed_area: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("stabilization parameter is unbounded: {0}")]
    UnboundedTau(&'static str),

    #[error("matrix is singular or numerically singular")]
    Singular,

    #[error("iterative solver stagnated after {iterations} iterations (relative residual {residual:e})")]
    Stagnation {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("time step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("steady state not reached in {steps} steps (last increment {last:e})")]
    SteadyNotReached { steps: usize, last: f64, history: Vec<f64> },

    #[error("dirichlet constraint conflict at dof {0}")]
    ConstraintConflict(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Config(_) | Error::Parse { .. }
        )
    }
}
