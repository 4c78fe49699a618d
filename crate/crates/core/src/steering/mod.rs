//! Steering-vector extraction and application.
//!
//! A steering vector is the difference between the condition-wise means of
//! per-sample token-mean activations, one vector per tapped layer, oriented
//! neutral -> accented. Applying it subtracts (neutralize) or adds
//! (accentuate) a scaled copy at one layer's block output during decoding,
//! rescaled so the activation keeps its original L2 norm.

mod apply;
mod extract;
mod sweep;
mod vector;

pub use apply::{apply_steering, SteerConfig, SteerSign, Steerer};
pub use extract::{extract_vectors, ExtractOptions, ExtractStats};
pub use sweep::{evaluate_condition, quality_gate, sweep, GateReport, SweepGrid, SweepOptions};
pub use vector::{load_vectors, save_vectors, SteeringVector, VectorMeta, VectorSet};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SteeringError {
    #[error("layer {layer} out of range for model with {n_layers} layers")]
    LayerOutOfRange { layer: usize, n_layers: usize },
    #[error("no steering vector for layer {0}")]
    MissingVector(usize),
    #[error("dimension mismatch: vector has {vector}, model expects {model}")]
    DimensionMismatch { vector: usize, model: usize },
    #[error("steer config targets layer {config}, vector is for layer {vector}")]
    LayerMismatch { config: usize, vector: usize },
    #[error("every {condition} sample failed generation; nothing to average")]
    AllSamplesFailed { condition: &'static str },
    #[error("vector file version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("vector file corrupt: {0}")]
    Corrupt(String),
    #[error("speaker id {0} not present in the speaker table")]
    UnknownSpeaker(usize),
    #[error(transparent)]
    Transformer(#[from] crate::transformer::TransformerError),
    #[error(transparent)]
    Task(#[from] crate::synth_task::TaskError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
