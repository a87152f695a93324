use thiserror::Error;

/// One failed model assumption, with the probe point that exposed it.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ValidationIssue {
    pub assumption: String,
    pub message: String,
    pub probe: Option<Vec<f64>>,
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.assumption, self.message)?;
        if let Some(p) = &self.probe {
            write!(f, " at x = {p:?}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} outside the valid range {range}")]
    Domain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("expected {expected:.3e} jumps per step exceeds the budget {budget:.3e}")]
    JumpBudget { expected: f64, budget: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("non-finite state at step {step} (path stream {stream})")]
    NonFinite { step: usize, stream: u64 },

    #[error("model validation failed: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<ValidationIssue>),

    #[error("inconclusive study: {0}")]
    Inconclusive(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "alpha",
            value: alpha,
            range: "(0, 2]",
        })
    }
}
