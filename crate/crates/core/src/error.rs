use thiserror::Error;

#[derive(Debug, Error)]
pub enum LaaksoError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("level {requested} exceeds the explicit j-sequence of length {available}")]
    SequenceTooShort { requested: usize, available: usize },

    #[error("digit index {index} out of range for depth {depth}")]
    DigitOutOfRange { index: usize, depth: usize },

    #[error("word of depth {word} does not fit a fiber of depth {depth}")]
    WordTooLong { word: usize, depth: usize },

    #[error("point at level {point} lies below cell level {cell}")]
    LevelMismatch { point: usize, cell: usize },

    #[error("graph too large: about {estimate} vertices, cap is {cap}")]
    TooLarge { estimate: u64, cap: u64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("domain mismatch: expected {expected} values, got {got}")]
    Domain { expected: usize, got: usize },

    #[error("forms have different kernels: {0}")]
    KernelMismatch(String),

    #[error("eigensolver did not converge: worst residual {residual:.3e} after {steps} Lanczos steps")]
    NoConvergence { residual: f64, steps: usize },

    #[error("spectral truncation error {bound:.3e} exceeds tolerance {tolerance:.3e}")]
    Truncation { bound: f64, tolerance: f64 },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = LaaksoError> = std::result::Result<T, E>;
