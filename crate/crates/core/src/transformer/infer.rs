use super::{
    ActivationTrace, GenerationResult, GenerationStatus, ModelConfig, ModelParams, Role,
    TransformerError,
};
use crate::numerics::{dot, gelu_scalar, matmul_raw, rope_rotate, softmax_row, Rng, Tape, VarId};
use std::collections::BTreeSet;

pub(crate) const ROPE_BASE: f64 = 10000.0;

/// Maps the post-residual block output of one layer at the current decode
/// position. Prompt positions are never passed through a hook.
pub trait DecodeHook {
    fn layer(&self) -> usize;
    fn apply(&self, position: usize, activation: &[f64]) -> Vec<f64>;
}

/// Identity hook; decoding with it must match hookless decoding exactly.
pub struct IdentityHook(pub usize);

impl DecodeHook for IdentityHook {
    fn layer(&self) -> usize {
        self.0
    }
    fn apply(&self, _position: usize, activation: &[f64]) -> Vec<f64> {
        activation.to_vec()
    }
}

#[derive(Debug, Clone)]
pub enum Sampler {
    Greedy,
    Temperature { tau: f64, rng: Rng },
}

impl Sampler {
    pub fn sample(&mut self, logits: &[f64]) -> usize {
        match self {
            Sampler::Greedy => {
                let mut best = 0;
                for (i, &x) in logits.iter().enumerate() {
                    if x > logits[best] {
                        best = i;
                    }
                }
                best
            }
            Sampler::Temperature { tau, rng } => {
                let scaled: Vec<f64> = logits.iter().map(|&x| x / *tau).collect();
                let probs = softmax_row(&scaled);
                let mut dart = rng.uniform();
                for (i, &p) in probs.iter().enumerate() {
                    dart -= p;
                    if dart < 0.0 {
                        return i;
                    }
                }
                probs.len() - 1
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub max_new: usize,
    pub sampler: Sampler,
    pub stop_token: usize,
    pub taps: BTreeSet<usize>,
}

impl GenerateOptions {
    pub fn greedy(max_new: usize, stop_token: usize) -> Self {
        GenerateOptions {
            max_new,
            sampler: Sampler::Greedy,
            stop_token,
            taps: BTreeSet::new(),
        }
    }

    pub fn with_taps(mut self, taps: impl IntoIterator<Item = usize>) -> Self {
        self.taps = taps.into_iter().collect();
        self
    }
}

pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

/// Handles to the taped forward graph, in canonical parameter order.
pub(crate) struct ForwardGraph {
    pub logits: VarId,
    pub block_out: Vec<VarId>,
    pub param_ids: Vec<VarId>,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self, TransformerError> {
        config.validate()?;
        let params = ModelParams::init(&config);
        Ok(Model { config, params })
    }

    pub fn from_params(config: ModelConfig, params: ModelParams) -> Result<Self, TransformerError> {
        config.validate()?;
        Ok(Model { config, params })
    }

    /// Digest of the parameter checkpoint (training state excluded), used to
    /// tie steering vectors to the model that produced them.
    pub fn digest(&self) -> String {
        let mut hasher = <sha2::Sha256 as sha2::Digest>::new();
        sha2::Digest::update(&mut hasher, self.params.to_checkpoint(&self.config).to_bytes());
        crate::numerics::hex_string(&sha2::Digest::finalize(hasher))
    }

    fn check_tokens(&self, tokens: &[usize]) -> Result<(), TransformerError> {
        if tokens.len() > self.config.max_seq_len {
            return Err(TransformerError::SequenceTooLong {
                len: tokens.len(),
                max: self.config.max_seq_len,
            });
        }
        for &t in tokens {
            if t >= self.config.vocab_size {
                return Err(TransformerError::TokenOutOfRange {
                    id: t,
                    vocab: self.config.vocab_size,
                });
            }
        }
        Ok(())
    }

    /// Full-context forward pass: logits for every position plus a trace of
    /// the tapped layers. Positions below `gen_start` are labeled prompt.
    pub fn forward_full(
        &self,
        tokens: &[usize],
        gen_start: usize,
        taps: &BTreeSet<usize>,
    ) -> Result<(Vec<f64>, ActivationTrace), TransformerError> {
        if tokens.is_empty() {
            return Err(TransformerError::EmptyPrompt);
        }
        self.check_tokens(tokens)?;
        if gen_start > tokens.len() {
            return Err(TransformerError::BadGenStart {
                gen_start,
                len: tokens.len(),
            });
        }
        for &l in taps {
            if l >= self.config.n_layers {
                return Err(TransformerError::HookLayerOutOfRange {
                    layer: l,
                    n_layers: self.config.n_layers,
                });
            }
        }
        let mut tape = Tape::new();
        let graph = taped_forward(&mut tape, &self.config, &self.params, tokens, false)?;
        let mut trace = ActivationTrace::default();
        let d = self.config.d_model;
        for &layer in taps {
            let block = tape.value(graph.block_out[layer]);
            for pos in 0..tokens.len() {
                let role = if pos < gen_start { Role::Prompt } else { Role::Generated };
                trace.record(layer, pos, role, block.data()[pos * d..(pos + 1) * d].to_vec());
            }
        }
        Ok((tape.value(graph.logits).data().to_vec(), trace))
    }

    /// Autoregressive decoding with a KV cache. The steering hook, when set,
    /// replaces the hooked layer's block output at the current generated
    /// position before it feeds the next block; downstream caches of
    /// generated positions therefore inherit the steered value, all within a
    /// single decoding pass.
    pub fn generate(
        &self,
        prompt: &[usize],
        mut opts: GenerateOptions,
        hook: Option<&dyn DecodeHook>,
    ) -> Result<GenerationResult, TransformerError> {
        if prompt.is_empty() {
            return Err(TransformerError::EmptyPrompt);
        }
        if opts.max_new == 0 {
            return Err(TransformerError::BadConfig("max_new must be >= 1".into()));
        }
        self.check_tokens(prompt)?;
        if let Some(h) = hook {
            if h.layer() >= self.config.n_layers {
                return Err(TransformerError::HookLayerOutOfRange {
                    layer: h.layer(),
                    n_layers: self.config.n_layers,
                });
            }
        }
        for &l in &opts.taps {
            if l >= self.config.n_layers {
                return Err(TransformerError::HookLayerOutOfRange {
                    layer: l,
                    n_layers: self.config.n_layers,
                });
            }
        }
        if prompt.len() >= self.config.max_seq_len {
            return Err(TransformerError::SequenceTooLong {
                len: prompt.len(),
                max: self.config.max_seq_len,
            });
        }
        let budget = opts.max_new.min(self.config.max_seq_len - prompt.len());

        let mut cache = KvCache::new(self.config.n_layers);
        let mut trace = if opts.taps.is_empty() {
            None
        } else {
            Some(ActivationTrace::default())
        };

        // Prefill: prompt activations are recorded but never hooked.
        let mut logits = vec![0.0; self.config.vocab_size];
        for (pos, &tok) in prompt.iter().enumerate() {
            logits = self.decode_step(tok, pos, None, &opts.taps, trace.as_mut(), Role::Prompt, &mut cache)?;
        }

        let mut tokens = Vec::new();
        let mut status = GenerationStatus::BudgetExhausted;
        for step in 0..budget {
            let tok = opts.sampler.sample(&logits);
            tokens.push(tok);
            // Every generated token is fed back, including the stop token, so
            // each one has a recorded (and steerable) activation.
            logits = self.decode_step(
                tok,
                prompt.len() + step,
                hook,
                &opts.taps,
                trace.as_mut(),
                Role::Generated,
                &mut cache,
            )?;
            if tok == opts.stop_token {
                status = GenerationStatus::Ok;
                break;
            }
        }
        let steps_used = tokens.len();
        Ok(GenerationResult {
            tokens,
            status,
            trace,
            steps_used,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn decode_step(
        &self,
        token: usize,
        pos: usize,
        hook: Option<&dyn DecodeHook>,
        taps: &BTreeSet<usize>,
        mut trace: Option<&mut ActivationTrace>,
        role: Role,
        cache: &mut KvCache,
    ) -> Result<Vec<f64>, TransformerError> {
        let cfg = &self.config;
        let d = cfg.d_model;
        let head_dim = cfg.head_dim();
        let scale = 1.0 / (head_dim as f64).sqrt();

        let mut x = self.params.embed.data()[token * d..(token + 1) * d].to_vec();
        for (l, layer) in self.params.layers.iter().enumerate() {
            // Attention sublayer.
            let h = rms_gain(&x, layer.attn_norm.data());
            let mut q = vec_mat(&h, layer.wq.data(), d);
            let mut k = vec_mat(&h, layer.wk.data(), d);
            let v = vec_mat(&h, layer.wv.data(), d);
            rope_rotate(&mut q, pos, cfg.n_heads, ROPE_BASE, false);
            rope_rotate(&mut k, pos, cfg.n_heads, ROPE_BASE, false);
            cache.k[l].extend_from_slice(&k);
            cache.v[l].extend_from_slice(&v);
            let n_cached = pos + 1;
            debug_assert_eq!(cache.k[l].len(), n_cached * d);

            let mut att = vec![0.0; d];
            let mut scores = vec![0.0; n_cached];
            for hh in 0..cfg.n_heads {
                let off = hh * head_dim;
                let qh = &q[off..off + head_dim];
                for (j, s) in scores.iter_mut().enumerate() {
                    *s = scale * dot(qh, &cache.k[l][j * d + off..j * d + off + head_dim]);
                }
                let probs = softmax_row(&scores);
                let out = &mut att[off..off + head_dim];
                for (j, &p) in probs.iter().enumerate() {
                    let vj = &cache.v[l][j * d + off..j * d + off + head_dim];
                    for (o, &vv) in out.iter_mut().zip(vj) {
                        *o += p * vv;
                    }
                }
            }
            let proj = vec_mat(&att, layer.wo.data(), d);
            for (xi, pi) in x.iter_mut().zip(&proj) {
                *xi += pi;
            }

            // MLP sublayer.
            let h2 = rms_gain(&x, layer.mlp_norm.data());
            let mut a1 = vec_mat(&h2, layer.w1.data(), cfg.d_ff);
            for a in &mut a1 {
                *a = gelu_scalar(*a);
            }
            let a2 = vec_mat(&a1, layer.w2.data(), d);
            for (xi, ai) in x.iter_mut().zip(&a2) {
                *xi += ai;
            }

            // Tap point: post-residual block output.
            if let Some(h) = hook {
                if h.layer() == l && role == Role::Generated {
                    x = h.apply(pos, &x);
                    if x.len() != d || !x.iter().all(|v| v.is_finite()) {
                        return Err(TransformerError::NonFiniteHidden { layer: l, position: pos });
                    }
                }
            }
            if taps.contains(&l) {
                if let Some(t) = trace.as_deref_mut() {
                    t.record(l, pos, role, x.clone());
                }
            }
        }

        let fh = rms_gain(&x, self.params.final_norm.data());
        Ok(vec_mat(&fh, self.params.lm_head.data(), cfg.vocab_size))
    }
}

struct KvCache {
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl KvCache {
    fn new(n_layers: usize) -> Self {
        KvCache {
            k: vec![Vec::new(); n_layers],
            v: vec![Vec::new(); n_layers],
        }
    }
}

fn rms_gain(x: &[f64], gain: &[f64]) -> Vec<f64> {
    let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let inv = 1.0 / (ms + 1e-12).sqrt();
    x.iter().zip(gain).map(|(v, g)| v * inv * g).collect()
}

/// Row vector times (in, out) matrix.
fn vec_mat(x: &[f64], w: &[f64], out_dim: usize) -> Vec<f64> {
    let mut y = vec![0.0; out_dim];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * out_dim..(i + 1) * out_dim];
        for (yj, &wij) in y.iter_mut().zip(row) {
            *yj += xi * wij;
        }
    }
    y
}

/// Builds the full forward graph on a tape. Leaves are pushed in canonical
/// parameter order; `with_grad` marks them as gradient targets.
pub(crate) fn taped_forward(
    tape: &mut Tape,
    config: &ModelConfig,
    params: &ModelParams,
    tokens: &[usize],
    with_grad: bool,
) -> Result<ForwardGraph, TransformerError> {
    let param_ids: Vec<VarId> = params
        .tensors()
        .into_iter()
        .map(|t| {
            let mut t = t.clone();
            t.requires_grad = with_grad;
            tape.leaf(t)
        })
        .collect();

    // Canonical order: embed, then 8 tensors per layer, final_norm, lm_head.
    let embed = param_ids[0];
    let layer_ids = |l: usize| -> [VarId; 8] {
        let base = 1 + l * 8;
        [
            param_ids[base],
            param_ids[base + 1],
            param_ids[base + 2],
            param_ids[base + 3],
            param_ids[base + 4],
            param_ids[base + 5],
            param_ids[base + 6],
            param_ids[base + 7],
        ]
    };
    let final_norm = param_ids[param_ids.len() - 2];
    let lm_head = param_ids[param_ids.len() - 1];

    let mut x = tape.embedding(embed, tokens)?;
    let mut block_out = Vec::with_capacity(config.n_layers);
    for l in 0..config.n_layers {
        let [attn_norm, wq, wk, wv, wo, mlp_norm, w1, w2] = layer_ids(l);
        let normed = tape.rms_norm(x)?;
        let h = tape.mul_bcast(normed, attn_norm)?;
        let q = tape.matmul(h, wq)?;
        let k = tape.matmul(h, wk)?;
        let v = tape.matmul(h, wv)?;
        let att = tape.causal_attention(q, k, v, config.n_heads, ROPE_BASE)?;
        let proj = tape.matmul(att, wo)?;
        x = tape.add(x, proj)?;

        let normed2 = tape.rms_norm(x)?;
        let h2 = tape.mul_bcast(normed2, mlp_norm)?;
        let a1 = tape.matmul(h2, w1)?;
        let g = tape.gelu(a1)?;
        let a2 = tape.matmul(g, w2)?;
        x = tape.add(x, a2)?;
        block_out.push(x);
    }
    let fnorm = tape.rms_norm(x)?;
    let fh = tape.mul_bcast(fnorm, final_norm)?;
    let logits = tape.matmul(fh, lm_head)?;
    Ok(ForwardGraph {
        logits,
        block_out,
        param_ids,
    })
}

// matmul_raw is re-exported for the brute-force oracles in integration tests.
#[doc(hidden)]
pub fn _oracle_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    matmul_raw(a, b, m, k, n)
}
