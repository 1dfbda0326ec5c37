use thiserror::Error;

pub type Result<T, E = AdpError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AdpError {
    #[error("integration interval must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no connected world found for seed {seed} after {attempts} attempts")]
    ConnectivityFailure { seed: u64, attempts: u32 },
    #[error("no collision-free trajectory among {candidates} candidates")]
    NoFeasibleTrajectory { candidates: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("replay buffer holds {have} transitions, need {need}")]
    InsufficientData { have: usize, need: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
