//! Decoder-only autoregressive transformer with per-layer activation taps,
//! KV-cache decoding, a steering hook, and a teacher-forced trainer.
//!
//! Blocks are pre-norm (RMS norm, no biases) with rotary position
//! embeddings. The tap point is the post-residual block output, after the
//! MLP residual add and before the final model-level norm.

mod config;
mod error;
mod infer;
mod params;
mod trace;
mod train;

pub use config::ModelConfig;
pub use error::TransformerError;
pub use infer::{DecodeHook, GenerateOptions, Model, Sampler};
pub use params::ModelParams;
pub use trace::{ActivationTrace, GenerationResult, GenerationStatus, Role, TraceEntry};
pub use infer::IdentityHook;
pub use train::{
    eval_loss, new_opt_state, train, train_state_from_checkpoint, train_state_to_checkpoint,
    TrainReport, TrainSchedule, TrainSequence,
};
