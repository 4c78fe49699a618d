use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Toy defaults; `vocab_size` comes from the task vocabulary.
    pub fn new(vocab_size: usize, seed: u64) -> Self {
        ModelConfig {
            n_layers: 4,
            d_model: 64,
            n_heads: 4,
            d_ff: 256,
            vocab_size,
            max_seq_len: 256,
            seed,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<(), super::TransformerError> {
        if self.d_model % self.n_heads != 0 {
            return Err(super::TransformerError::BadConfig(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.n_layers == 0 || self.vocab_size == 0 || self.max_seq_len == 0 {
            return Err(super::TransformerError::BadConfig(
                "layer count, vocab size and max_seq_len must be positive".into(),
            ));
        }
        Ok(())
    }
}
