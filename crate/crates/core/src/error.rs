use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants split into two families: input/validation problems (bad
/// parameters, malformed files, support violations) and numerical failures
/// (solver non-convergence, exceeded caps, failed certificates). The CLI maps
/// them to distinct exit codes through [`SepError::is_numerical`].
#[derive(Debug, Error)]
pub enum SepError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty environment: {0}")]
    EmptyEnvironment(String),

    #[error("environment is not connected: {0}")]
    Disconnected(String),

    #[error("support violation: {message} (requires box side >= {required_side})")]
    SupportViolation { message: String, required_side: f64 },

    #[error("unknown seed label `{0}`")]
    UnknownLabel(String),

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(
        "conjugate gradient did not converge after {iterations} iterations \
         (relative residual {residual:e})"
    )]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("inconsistent right-hand side: {0}")]
    InconsistentSystem(String),

    #[error("series cap exceeded: {required_splits} time splits needed (at most {max_splits} allowed)")]
    CapExceeded {
        required_splits: usize,
        max_splits: usize,
    },

    #[error("slab certificate failed after {halvings} halvings: largest component {max_component} > cap {cap}")]
    CertificateFailure {
        halvings: usize,
        max_component: usize,
        cap: usize,
    },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SepError {
    /// `true` for failures of a numerical procedure on otherwise valid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SepError::NoConvergence { .. }
                | SepError::InconsistentSystem(_)
                | SepError::CapExceeded { .. }
                | SepError::CertificateFailure { .. }
                | SepError::Quadrature(_)
                | SepError::Numerical(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SepError::InvalidParameter(msg.into())
    }
}

pub type Result<T, E = SepError> = std::result::Result<T, E>;
