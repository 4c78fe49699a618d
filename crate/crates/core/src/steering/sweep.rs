use super::{SteerConfig, SteerSign, Steerer, SteeringError, VectorSet};
use crate::eval::{
    amr, content_error_rate, cosine_sim, isr, parse_csv, speaker_embedding, AttrClassifier,
    AttrTarget, EvalRow, CSV_HEADER,
};
use crate::numerics::Rng;
use crate::synth_task::{assemble_prompt, Triplet, Vocab};
use crate::transformer::{GenerateOptions, GenerationResult, Model, Sampler};
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

const STREAM_SWEEP: u64 = 0x7377_6565_7000_0000;

#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub layers: Vec<usize>,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub temperature: f64,
    pub budget_factor: usize,
    pub min_budget: usize,
    pub epsilon: f64,
    pub sign: SteerSign,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            temperature: 1.0,
            budget_factor: 4,
            min_budget: 8,
            epsilon: 1e-8,
            sign: SteerSign::Subtract,
        }
    }
}

/// Generates on every eval triplet under one condition and folds the metric
/// bundle. Per-sample sampler streams depend only on the sample index, so an
/// alpha = 0 condition reproduces the baseline token for token.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_condition(
    model: &Model,
    vectors: Option<(&VectorSet, SteerConfig)>,
    eval_set: &[Triplet],
    clf: &AttrClassifier,
    vocab: &Vocab,
    opts: &SweepOptions,
    rng: &Rng,
    condition: &str,
) -> Result<EvalRow, SteeringError> {
    if eval_set.is_empty() {
        return Err(SteeringError::Eval(crate::eval::EvalError::EmptyInput(
            "eval set",
        )));
    }
    let steer = match vectors {
        Some((set, config)) => {
            let vector = set
                .get(config.layer)
                .ok_or(SteeringError::MissingVector(config.layer))?;
            if config.layer >= model.config.n_layers {
                return Err(SteeringError::LayerOutOfRange {
                    layer: config.layer,
                    n_layers: model.config.n_layers,
                });
            }
            Some((vector, config))
        }
        None => None,
    };

    let outcomes: Vec<Result<(GenerationResult, u64), SteeringError>> = eval_set
        .par_iter()
        .enumerate()
        .map(|(i, triplet)| {
            let sample_rng = rng.child(STREAM_SWEEP + i as u64);
            let prompt = assemble_prompt(
                vocab,
                &triplet.reference_text,
                &triplet.reference_sequence,
                &triplet.target_text,
            );
            let budget = (opts.budget_factor * triplet.target_text.len()).max(opts.min_budget);
            let generate_opts = GenerateOptions {
                max_new: budget,
                sampler: Sampler::Temperature {
                    tau: opts.temperature,
                    rng: sample_rng,
                },
                stop_token: Vocab::STOP,
                taps: Default::default(),
            };
            match &steer {
                Some((vector, config)) => {
                    let steerer = Steerer::new(vector, *config, model.config.d_model)?;
                    let result = model.generate(&prompt, generate_opts, Some(&steerer))?;
                    Ok((result, steerer.norm_guard_events()))
                }
                None => {
                    let result = model.generate(&prompt, generate_opts, None)?;
                    Ok((result, 0))
                }
            }
        })
        .collect();

    let mut results = Vec::with_capacity(eval_set.len());
    let mut norm_guard_events = 0u64;
    for outcome in outcomes {
        let (r, events) = outcome?;
        norm_guard_events += events;
        results.push(r);
    }

    // Metric denominators cover successful generations only.
    let isr_value = isr(&results)?;
    let mut sequences = Vec::new();
    let mut spk_total = 0.0;
    let mut cer_total = 0.0;
    let mut n_ok = 0usize;
    for (result, triplet) in results.iter().zip(eval_set) {
        if !result.ok() {
            continue;
        }
        n_ok += 1;
        let generated = &result.tokens;
        spk_total += match (
            speaker_embedding(generated, vocab),
            speaker_embedding(&triplet.reference_sequence, vocab),
        ) {
            (Ok(g), Ok(r)) => cosine_sim(&g, &r),
            // No timbre symbols in an "ok" generation: furthest possible.
            _ => 0.0,
        };
        cer_total += content_error_rate(&vocab.canonical_content(generated), &triplet.target_text)?;
        sequences.push(generated.clone());
    }
    let (amr_accented, amr_neutral) = if sequences.is_empty() {
        (0.0, 0.0)
    } else {
        (
            amr(&sequences, clf, AttrTarget::Accented, vocab)?.fraction,
            amr(&sequences, clf, AttrTarget::Neutral, vocab)?.fraction,
        )
    };
    let denom = n_ok.max(1) as f64;
    Ok(EvalRow {
        condition: condition.to_string(),
        layer: steer.as_ref().map(|(_, c)| c.layer),
        alpha: steer.as_ref().map(|(_, c)| c.alpha),
        isr: isr_value,
        amr_accented,
        amr_neutral,
        spk_sim: spk_total / denom,
        cer: cer_total / denom,
        n_samples: eval_set.len(),
        norm_guard_events,
    })
}

/// Generation-quality gate over unsteered decoding: the accent must follow
/// the prompt condition and timbre must track the reference speaker before
/// steering effects are meaningful.
#[derive(Debug, Clone)]
pub struct GateReport {
    pub amr_accented_on_accented: f64,
    pub amr_neutral_on_neutral: f64,
    pub spk_sim: f64,
    pub isr: f64,
}

impl GateReport {
    pub fn passed(&self, min_amr: f64, min_spk: f64) -> bool {
        self.amr_accented_on_accented >= min_amr
            && self.amr_neutral_on_neutral >= min_amr
            && self.spk_sim >= min_spk
    }
}

pub fn quality_gate(
    model: &Model,
    eval_accented: &[Triplet],
    eval_neutral: &[Triplet],
    clf: &AttrClassifier,
    vocab: &Vocab,
    opts: &SweepOptions,
    rng: &Rng,
) -> Result<GateReport, SteeringError> {
    let acc = evaluate_condition(model, None, eval_accented, clf, vocab, opts, rng, "gate_accented")?;
    let neu = evaluate_condition(model, None, eval_neutral, clf, vocab, opts, rng, "gate_neutral")?;
    let total = (acc.n_samples + neu.n_samples) as f64;
    Ok(GateReport {
        amr_accented_on_accented: acc.amr_accented,
        amr_neutral_on_neutral: neu.amr_neutral,
        spk_sim: (acc.spk_sim * acc.n_samples as f64 + neu.spk_sim * neu.n_samples as f64) / total,
        isr: (acc.isr * acc.n_samples as f64 + neu.isr * neu.n_samples as f64) / total,
    })
}

/// Runs the unsteered baseline plus every (layer, alpha) grid condition.
/// Rows append to `csv_path` as they finish; a rerun skips conditions whose
/// rows already exist, so interrupted sweeps resume to identical output.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    model: &Model,
    vectors: &VectorSet,
    grid: &SweepGrid,
    eval_set: &[Triplet],
    clf: &AttrClassifier,
    vocab: &Vocab,
    opts: &SweepOptions,
    rng: &Rng,
    csv_path: Option<&Path>,
) -> Result<Vec<EvalRow>, SteeringError> {
    for &layer in &grid.layers {
        if vectors.get(layer).is_none() {
            return Err(SteeringError::MissingVector(layer));
        }
    }

    let mut done: Vec<EvalRow> = Vec::new();
    if let Some(path) = csv_path {
        if path.exists() {
            done = parse_csv(&std::fs::read_to_string(path)?)?;
        } else {
            std::fs::write(path, format!("{CSV_HEADER}\n"))?;
        }
    }
    let already =
        |layer: Option<usize>, alpha: Option<f64>| done.iter().any(|r| r.layer == layer && r.alpha == alpha);

    let mut conditions: Vec<(Option<usize>, Option<f64>)> = vec![(None, None)];
    for &layer in &grid.layers {
        for &alpha in &grid.alphas {
            conditions.push((Some(layer), Some(alpha)));
        }
    }

    let mut rows = done.clone();
    for (layer, alpha) in conditions {
        if already(layer, alpha) {
            continue;
        }
        let row = match layer {
            None => evaluate_condition(model, None, eval_set, clf, vocab, opts, rng, "baseline")?,
            Some(l) => {
                let config = SteerConfig {
                    layer: l,
                    alpha: alpha.unwrap(),
                    sign: opts.sign,
                    epsilon: opts.epsilon,
                };
                evaluate_condition(
                    model,
                    Some((vectors, config)),
                    eval_set,
                    clf,
                    vocab,
                    opts,
                    rng,
                    "steered",
                )?
            }
        };
        if let Some(path) = csv_path {
            let mut file = std::fs::OpenOptions::new().append(true).open(path)?;
            let mut line = crate::eval::format_csv(&[row.clone()]);
            line.replace_range(0..CSV_HEADER.len() + 1, "");
            file.write_all(line.as_bytes())?;
        }
        rows.push(row);
    }
    Ok(rows)
}
