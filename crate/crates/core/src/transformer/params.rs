use super::{ModelConfig, TransformerError};
use crate::numerics::{Checkpoint, Rng, Tensor};

/// Weights are stored (in_dim, out_dim) row-major so a forward projection is
/// a plain matmul. Output projections (`wo`, `w2`) start at zero so a fresh
/// model's residual stream is the raw embedding.
#[derive(Debug, Clone)]
pub struct LayerParams {
    pub attn_norm: Tensor,
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
    pub mlp_norm: Tensor,
    pub w1: Tensor,
    pub w2: Tensor,
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    pub embed: Tensor,
    pub layers: Vec<LayerParams>,
    pub final_norm: Tensor,
    pub lm_head: Tensor,
}

impl ModelParams {
    pub fn init(config: &ModelConfig) -> Self {
        let (d, ff, v) = (config.d_model, config.d_ff, config.vocab_size);
        let mut rng = Rng::new(config.seed, 0x6d6f64656c); // "model"
        let proj_std = 1.0 / (d as f64).sqrt();
        let layers = (0..config.n_layers)
            .map(|_| LayerParams {
                attn_norm: ones(d),
                wq: Tensor::randn(vec![d, d], proj_std, &mut rng),
                wk: Tensor::randn(vec![d, d], proj_std, &mut rng),
                wv: Tensor::randn(vec![d, d], proj_std, &mut rng),
                wo: Tensor::zeros(vec![d, d]),
                mlp_norm: ones(d),
                w1: Tensor::randn(vec![d, ff], proj_std, &mut rng),
                w2: Tensor::zeros(vec![ff, d]),
            })
            .collect();
        ModelParams {
            embed: Tensor::randn(vec![v, d], 0.02, &mut rng),
            layers,
            final_norm: ones(d),
            lm_head: Tensor::randn(vec![d, v], 0.02, &mut rng),
        }
    }

    /// Canonical parameter order shared by the trainer, the optimizer state,
    /// and the checkpoint layout.
    pub fn names(config: &ModelConfig) -> Vec<String> {
        let mut names = vec!["embed".to_string()];
        for l in 0..config.n_layers {
            for field in ["attn_norm", "wq", "wk", "wv", "wo", "mlp_norm", "w1", "w2"] {
                names.push(format!("layers.{l}.{field}"));
            }
        }
        names.push("final_norm".into());
        names.push("lm_head".into());
        names
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.embed];
        for layer in &self.layers {
            out.extend([
                &layer.attn_norm,
                &layer.wq,
                &layer.wk,
                &layer.wv,
                &layer.wo,
                &layer.mlp_norm,
                &layer.w1,
                &layer.w2,
            ]);
        }
        out.push(&self.final_norm);
        out.push(&self.lm_head);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.embed];
        for layer in &mut self.layers {
            out.extend([
                &mut layer.attn_norm,
                &mut layer.wq,
                &mut layer.wk,
                &mut layer.wv,
                &mut layer.wo,
                &mut layer.mlp_norm,
                &mut layer.w1,
                &mut layer.w2,
            ]);
        }
        out.push(&mut self.final_norm);
        out.push(&mut self.lm_head);
        out
    }

    pub fn to_checkpoint(&self, config: &ModelConfig) -> Checkpoint {
        let mut ckpt = Checkpoint::default();
        ckpt.push("config", config_tensor(config));
        for (name, tensor) in Self::names(config).into_iter().zip(self.tensors()) {
            ckpt.push(name, tensor.clone());
        }
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(ModelConfig, Self), TransformerError> {
        let config = parse_config_tensor(
            ckpt.get("config")
                .ok_or_else(|| TransformerError::CheckpointMismatch("missing config tensor".into()))?,
        )?;
        config.validate()?;
        let mut params = ModelParams::init(&config);
        for (name, slot) in Self::names(&config).into_iter().zip(params.tensors_mut()) {
            let stored = ckpt
                .get(&name)
                .ok_or_else(|| TransformerError::CheckpointMismatch(format!("missing tensor {name}")))?;
            if stored.shape() != slot.shape() {
                return Err(TransformerError::CheckpointMismatch(format!(
                    "tensor {name}: shape {:?} vs expected {:?}",
                    stored.shape(),
                    slot.shape()
                )));
            }
            *slot = stored.clone();
        }
        Ok((config, params))
    }
}

fn ones(n: usize) -> Tensor {
    Tensor::new(vec![n], vec![1.0; n]).expect("ones")
}

fn config_tensor(config: &ModelConfig) -> Tensor {
    // Seed is split into two 32-bit halves so any u64 survives the f64 trip.
    Tensor::new(
        vec![8],
        vec![
            config.n_layers as f64,
            config.d_model as f64,
            config.n_heads as f64,
            config.d_ff as f64,
            config.vocab_size as f64,
            config.max_seq_len as f64,
            (config.seed >> 32) as f64,
            (config.seed & 0xffff_ffff) as f64,
        ],
    )
    .expect("config tensor")
}

fn parse_config_tensor(t: &Tensor) -> Result<ModelConfig, TransformerError> {
    let d = t.data();
    if d.len() != 8 {
        return Err(TransformerError::CheckpointMismatch(format!(
            "config tensor has {} entries, expected 8",
            d.len()
        )));
    }
    Ok(ModelConfig {
        n_layers: d[0] as usize,
        d_model: d[1] as usize,
        n_heads: d[2] as usize,
        d_ff: d[3] as usize,
        vocab_size: d[4] as usize,
        max_seq_len: d[5] as usize,
        seed: ((d[6] as u64) << 32) | (d[7] as u64),
    })
}
