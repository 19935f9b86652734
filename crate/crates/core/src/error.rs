use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QwalkError {
    #[error("coin is not normalized (norm² = {norm_sq:.3e}, tolerance {tol:.1e})")]
    NotNormalized { norm_sq: f64, tol: f64 },

    #[error("Fock truncation exceeded: tail mass {tail:.3e} > {tol:.1e} at fock_dim {fock_dim}")]
    Truncation {
        tail: f64,
        tol: f64,
        fock_dim: usize,
    },

    #[error("pulse compilation mismatch: operator distance {distance:.3e} exceeds {tol:.1e}")]
    Compilation { distance: f64, tol: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error(
        "measurement outcome {outcome} has probability {probability:.3e}; post-state undefined"
    )]
    DegenerateOutcome {
        outcome: &'static str,
        probability: f64,
    },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

impl From<std::io::Error> for QwalkError {
    fn from(e: std::io::Error) -> Self {
        QwalkError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QwalkError>;
