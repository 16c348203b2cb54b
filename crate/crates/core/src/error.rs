use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CbfError {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configuration or input failed validation.
    #[error("validation error: {0}")]
    Validation(String),
    /// A numerical procedure did not reach its accuracy target.
    #[error("numerical error: {message}")]
    Numerical {
        message: String,
        diagnostics: Vec<(String, f64)>,
    },
    /// A series did not converge within its term cap.
    #[error("series did not converge after {terms} terms (last term {last_term:e}); {advice}")]
    NonConvergence {
        terms: usize,
        last_term: f64,
        advice: String,
    },
    /// The contraction hypothesis q < 1 does not hold for the kernel pair.
    #[error("hypothesis q<1 violated (q = {q})")]
    HypothesisViolation { q: f64 },
    /// Divergence of a Lévy moment could not be decided.
    #[error("indeterminate: {0}")]
    Indeterminate(String),
}

impl CbfError {
    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        CbfError::Numerical {
            message: message.into(),
            diagnostics: Vec::new(),
        }
    }

    pub(crate) fn numerical_with(message: impl Into<String>, diagnostics: Vec<(String, f64)>) -> Self {
        CbfError::Numerical {
            message: message.into(),
            diagnostics,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            CbfError::Domain(_) | CbfError::Validation(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CbfError>;
