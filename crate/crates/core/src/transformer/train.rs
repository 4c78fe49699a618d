use super::infer::taped_forward;
use super::{Model, TransformerError};
use crate::numerics::{adam_step, AdamParams, AdamState, NumericsError, Rng, Tape};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Stream id for per-step batch sampling; each step derives its own child
/// stream so a resumed run continues the exact same index sequence.
const STREAM_TRAIN_BATCH: u64 = 0x7472_6169_6e00_0000;

#[derive(Debug, Clone)]
pub struct TrainSequence {
    pub tokens: Vec<usize>,
    /// First position that belongs to the generated segment; the loss covers
    /// predictions for positions >= gen_start only.
    pub gen_start: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub warmup_steps: usize,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            steps: 2000,
            batch_size: 16,
            lr: 1e-3,
            warmup_steps: 50,
            seed: 0,
            log_every: 50,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub loss_curve: Vec<(u64, f64)>,
    pub final_loss: f64,
    pub steps_done: u64,
}

fn sample_loss_and_grads(
    model: &Model,
    seq: &TrainSequence,
    with_grad: bool,
) -> Result<(f64, Vec<Vec<f64>>), TransformerError> {
    let tokens = &seq.tokens;
    let t_len = tokens.len();
    debug_assert!(t_len >= 2);
    let mut targets = vec![0usize; t_len];
    let mut mask = vec![0.0; t_len];
    for p in 0..t_len - 1 {
        targets[p] = tokens[p + 1];
        if p + 1 >= seq.gen_start {
            mask[p] = 1.0;
        }
    }

    let mut tape = Tape::new();
    let graph = taped_forward(&mut tape, &model.config, &model.params, tokens, with_grad)?;
    let loss = tape.cross_entropy(graph.logits, &targets, &mask)?;
    let loss_value = tape.value(loss).scalar_value();
    if !with_grad {
        return Ok((loss_value, Vec::new()));
    }
    tape.backward(loss)?;
    let grads = graph
        .param_ids
        .iter()
        .map(|&id| tape.grad(id).expect("param grad").to_vec())
        .collect();
    Ok((loss_value, grads))
}

/// Mean masked cross-entropy over a set of sequences, without gradients.
pub fn eval_loss(model: &Model, corpus: &[TrainSequence]) -> Result<f64, TransformerError> {
    if corpus.is_empty() {
        return Err(TransformerError::EmptyCorpus);
    }
    let losses: Vec<Result<f64, TransformerError>> = corpus
        .par_iter()
        .map(|seq| sample_loss_and_grads(model, seq, false).map(|(l, _)| l))
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / corpus.len() as f64)
}

/// Teacher-forced training with next-token cross-entropy on generated
/// positions. Runs `schedule.steps` optimizer steps starting after
/// `start_step`; per-sample gradients are computed in parallel and reduced
/// in batch-slot order, so results do not depend on thread scheduling.
pub fn train(
    model: &mut Model,
    corpus: &[TrainSequence],
    schedule: &TrainSchedule,
    opt_state: &mut AdamState,
    start_step: u64,
) -> Result<TrainReport, TransformerError> {
    if corpus.is_empty() {
        return Err(TransformerError::EmptyCorpus);
    }
    for seq in corpus {
        if seq.tokens.len() > model.config.max_seq_len {
            return Err(TransformerError::SequenceTooLong {
                len: seq.tokens.len(),
                max: model.config.max_seq_len,
            });
        }
        if seq.tokens.len() < 2 || seq.gen_start >= seq.tokens.len() {
            return Err(TransformerError::BadGenStart {
                gen_start: seq.gen_start,
                len: seq.tokens.len(),
            });
        }
    }

    let hyper_base = AdamParams {
        lr: schedule.lr,
        ..AdamParams::default()
    };
    let mut report = TrainReport::default();
    for local in 0..schedule.steps {
        let step = start_step + local as u64 + 1;
        let mut batch_rng = Rng::new(schedule.seed, STREAM_TRAIN_BATCH ^ step);
        let indices: Vec<usize> = (0..schedule.batch_size)
            .map(|_| batch_rng.below(corpus.len()))
            .collect();

        let per_sample: Vec<Result<(f64, Vec<Vec<f64>>), TransformerError>> = indices
            .par_iter()
            .map(|&i| sample_loss_and_grads(model, &corpus[i], true))
            .collect();

        let mut batch_loss = 0.0;
        let mut grads: Option<Vec<Vec<f64>>> = None;
        for res in per_sample {
            let (loss, g) = match res {
                Ok(v) => v,
                Err(TransformerError::Numerics(NumericsError::NonFinite { .. })) => {
                    return Err(TransformerError::Diverged {
                        step: step as usize,
                        loss: f64::NAN,
                    })
                }
                Err(e) => return Err(e),
            };
            batch_loss += loss;
            match &mut grads {
                None => grads = Some(g),
                Some(acc) => {
                    for (a, b) in acc.iter_mut().zip(&g) {
                        for (x, y) in a.iter_mut().zip(b) {
                            *x += y;
                        }
                    }
                }
            }
        }
        batch_loss /= schedule.batch_size as f64;
        if !batch_loss.is_finite() {
            return Err(TransformerError::Diverged {
                step: step as usize,
                loss: batch_loss,
            });
        }
        let mut grads = grads.expect("non-empty batch");
        let inv_b = 1.0 / schedule.batch_size as f64;
        for g in &mut grads {
            for x in g.iter_mut() {
                *x *= inv_b;
            }
        }

        let warm = if schedule.warmup_steps > 0 {
            (step as f64 / schedule.warmup_steps as f64).min(1.0)
        } else {
            1.0
        };
        let hyper = AdamParams {
            lr: hyper_base.lr * warm,
            ..hyper_base
        };
        let mut tensors = model.params.tensors_mut();
        let mut param_bufs: Vec<&mut [f64]> = tensors.iter_mut().map(|t| t.data_mut()).collect();
        let grad_slices: Vec<&[f64]> = grads.iter().map(|g| g.as_slice()).collect();
        adam_step(&mut param_bufs, &grad_slices, opt_state, &hyper, step)?;

        if local % schedule.log_every == 0 || local + 1 == schedule.steps {
            report.loss_curve.push((step, batch_loss));
        }
        report.final_loss = batch_loss;
        report.steps_done = step;
    }
    Ok(report)
}

/// Fresh optimizer state sized for the model's parameters.
pub fn new_opt_state(model: &Model) -> AdamState {
    let tensors = model.params.tensors();
    let slices: Vec<&[f64]> = tensors.iter().map(|t| t.data()).collect();
    AdamState::zeros_like(&slices)
}

/// Full training state as one checkpoint: parameters plus Adam moments and
/// the step counter, so training resumes exactly where it stopped.
pub fn train_state_to_checkpoint(model: &Model, opt: &AdamState, step: u64) -> crate::numerics::Checkpoint {
    use crate::numerics::Tensor;
    let mut ckpt = model.params.to_checkpoint(&model.config);
    let names = crate::transformer::ModelParams::names(&model.config);
    for ((name, m), v) in names.iter().zip(&opt.m).zip(&opt.v) {
        ckpt.push(format!("adam.m.{name}"), Tensor::new(vec![m.len()], m.clone()).expect("moment"));
        ckpt.push(format!("adam.v.{name}"), Tensor::new(vec![v.len()], v.clone()).expect("moment"));
    }
    ckpt.push("train.step", Tensor::scalar(step as f64));
    ckpt
}

/// Inverse of [`train_state_to_checkpoint`]. Checkpoints written without
/// training state load with fresh optimizer buffers at step 0.
pub fn train_state_from_checkpoint(
    ckpt: &crate::numerics::Checkpoint,
) -> Result<(Model, AdamState, u64), TransformerError> {
    let (config, params) = crate::transformer::ModelParams::from_checkpoint(ckpt)?;
    let model = Model::from_params(config.clone(), params)?;
    let names = crate::transformer::ModelParams::names(&config);
    let mut opt = new_opt_state(&model);
    for (i, name) in names.iter().enumerate() {
        if let Some(t) = ckpt.get(&format!("adam.m.{name}")) {
            opt.m[i] = t.data().to_vec();
        }
        if let Some(t) = ckpt.get(&format!("adam.v.{name}")) {
            opt.v[i] = t.data().to_vec();
        }
    }
    let step = ckpt.get("train.step").map(|t| t.scalar_value() as u64).unwrap_or(0);
    Ok((model, opt, step))
}
