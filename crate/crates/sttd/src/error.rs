use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Inverse FFT produced an imaginary residue above tolerance; the input
    /// did not satisfy conjugate symmetry. Signals an upstream bug.
    #[error("conjugate symmetry violated: max imaginary residue {residue:e} exceeds {tolerance:e}")]
    SymmetryViolation { residue: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("sequence has {got} frames, need at least {needed}")]
    SequenceTooShort { needed: usize, got: usize },

    /// Requested SCR cannot be reached with blob amplitude <= 1 on the
    /// given background.
    #[error("infeasible scene spec: {0}")]
    Infeasible(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
