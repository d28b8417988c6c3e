pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("action {action} out of range for {count} actions")]
    ActionOutOfRange { action: usize, count: usize },
    #[error("non-finite values in {0}")]
    CorruptParams(&'static str),
    #[error("replay buffer holds {len} transitions, need at least {needed}")]
    BufferTooSmall { len: usize, needed: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Core(#[from] cdmr_core::Error),
}
