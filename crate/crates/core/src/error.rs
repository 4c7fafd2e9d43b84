use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("expected {expected} scores, got {got}")]
    ScoreCountMismatch { expected: usize, got: usize },

    #[error("degenerate bid multiplier {multiplier:e} for ad {ad_id}")]
    DegenerateMultiplier { ad_id: String, multiplier: f64 },

    #[error(
        "critical bid search has no solution: score at upper bid {score_hi} < target {target}"
    )]
    NoCriticalBid { score_hi: f64, target: f64 },

    #[error("normalizer has not been fitted")]
    UnfittedNormalizer,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be finite, got {x}"
        )))
    }
}
