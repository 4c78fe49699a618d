use crate::numerics::NumericsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransformerError {
    #[error("bad model config: {0}")]
    BadConfig(String),
    #[error("token id {id} out of vocab range {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },
    #[error("sequence length {len} exceeds max_seq_len {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("gen_start {gen_start} past sequence end {len}")]
    BadGenStart { gen_start: usize, len: usize },
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("steering hook targets layer {layer}, model has {n_layers}")]
    HookLayerOutOfRange { layer: usize, n_layers: usize },
    #[error("non-finite hidden state after hook at layer {layer}, position {position}")]
    NonFiniteHidden { layer: usize, position: usize },
    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("checkpoint does not match config: {0}")]
    CheckpointMismatch(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
