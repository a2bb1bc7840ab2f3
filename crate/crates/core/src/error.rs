use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("membrane potential diverged at frame {frame} (neuron {neuron})")]
    Diverged { frame: usize, neuron: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate reference probability {prob:e} at step {step}")]
    DegenerateReference { step: usize, prob: f64 },

    #[error("degenerate action distribution: {0}")]
    DegenerateDistribution(String),

    #[error("empty sequence passed to {0}")]
    Empty(&'static str),

    #[error("episode already finished after {0} frames")]
    EpisodeDone(usize),

    #[error("episode buffer is missing reference probabilities at step {0}")]
    MissingReference(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
