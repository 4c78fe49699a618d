use super::{SteeringError, SteeringVector, VectorMeta, VectorSet};
use crate::numerics::Rng;
use crate::synth_task::{assemble_prompt, perturb_reference, SpeakerProfile, Triplet, Vocab};
use crate::transformer::{GenerateOptions, Model, Sampler};
use rayon::prelude::*;
use std::collections::BTreeSet;

/// Per-sample stream offset. Both conditions share the same per-index
/// streams: identical triplet lists then yield identical generations (the
/// self-difference is exactly zero) and swapping the two sets negates the
/// extracted vectors exactly.
const STREAM_EXTRACT: u64 = 0x6578_7472_0000_0000;

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub layers: BTreeSet<usize>,
    /// Perturb reference sequences before prompting (speaker decoupling).
    pub augment: bool,
    pub kappa: f64,
    pub gate: f64,
    /// Decode budget: max_new = budget_factor * target length, at least
    /// min_budget.
    pub budget_factor: usize,
    pub min_budget: usize,
    pub temperature: f64,
    /// Recorded in metadata; None writes 0 (timestamp-free mode).
    pub timestamp: Option<u64>,
}

impl ExtractOptions {
    pub fn new(layers: impl IntoIterator<Item = usize>, augment: bool) -> Self {
        ExtractOptions {
            layers: layers.into_iter().collect(),
            augment,
            kappa: 20.0,
            gate: 0.3,
            budget_factor: 4,
            min_budget: 8,
            temperature: 1.0,
            timestamp: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExtractStats {
    pub n_accented_ok: usize,
    pub n_accented_failed: usize,
    pub n_neutral_ok: usize,
    pub n_neutral_failed: usize,
}

/// Token-mean activation per tapped layer for one successful generation.
type SampleMeans = Vec<(usize, Vec<f64>)>;

fn run_condition(
    model: &Model,
    triplets: &[Triplet],
    speakers: &[SpeakerProfile],
    vocab: &Vocab,
    opts: &ExtractOptions,
    rng: &Rng,
) -> Result<Vec<Option<SampleMeans>>, SteeringError> {
    triplets
        .par_iter()
        .enumerate()
        .map(|(i, triplet)| -> Result<Option<SampleMeans>, SteeringError> {
            let sample_rng = rng.child(STREAM_EXTRACT + i as u64);
            let speaker = speakers
                .get(triplet.speaker_id)
                .ok_or(SteeringError::UnknownSpeaker(triplet.speaker_id))?;
            let reference = if opts.augment {
                let mut perturb_rng = sample_rng.child(1);
                perturb_reference(
                    &triplet.reference_sequence,
                    speaker,
                    opts.kappa,
                    opts.gate,
                    vocab,
                    &mut perturb_rng,
                )?
            } else {
                triplet.reference_sequence.clone()
            };
            let prompt = assemble_prompt(vocab, &triplet.reference_text, &reference, &triplet.target_text);
            let budget = (opts.budget_factor * triplet.target_text.len()).max(opts.min_budget);
            let generate_opts = GenerateOptions {
                max_new: budget,
                sampler: Sampler::Temperature {
                    tau: opts.temperature,
                    rng: sample_rng.child(2),
                },
                stop_token: Vocab::STOP,
                taps: opts.layers.clone(),
            };
            let result = model.generate(&prompt, generate_opts, None)?;
            if !result.ok() {
                return Ok(None);
            }
            let trace = result.trace.expect("taps requested");
            let means: SampleMeans = opts
                .layers
                .iter()
                .map(|&l| {
                    let mean = trace
                        .mean_generated(l)
                        .expect("generated positions exist for successful generations");
                    (l, mean)
                })
                .collect();
            Ok(Some(means))
        })
        .collect()
}

/// Condition-mean of per-sample means in fixed sample-index order; failed
/// samples contribute neither to the sum nor to the count.
fn condition_mean(
    per_sample: &[Option<SampleMeans>],
    layers: &BTreeSet<usize>,
    d_model: usize,
    condition: &'static str,
) -> Result<(Vec<Vec<f64>>, usize), SteeringError> {
    let mut sums: Vec<Vec<f64>> = layers.iter().map(|_| vec![0.0; d_model]).collect();
    let mut count = 0usize;
    for sample in per_sample.iter().flatten() {
        count += 1;
        for (slot, (_, mean)) in sums.iter_mut().zip(sample) {
            for (s, &m) in slot.iter_mut().zip(mean) {
                *s += m;
            }
        }
    }
    if count == 0 {
        return Err(SteeringError::AllSamplesFailed { condition });
    }
    for slot in &mut sums {
        for s in slot.iter_mut() {
            *s /= count as f64;
        }
    }
    Ok((sums, count))
}

/// Extracts one steering vector per tapped layer: the difference between the
/// accented and neutral condition means of per-sample token-mean activations
/// over generated positions. Generations run in parallel; the reduction is
/// sequential in sample-index order.
pub fn extract_vectors(
    model: &Model,
    accented: &[Triplet],
    neutral: &[Triplet],
    speakers: &[SpeakerProfile],
    vocab: &Vocab,
    opts: &ExtractOptions,
    rng: &Rng,
) -> Result<(VectorSet, ExtractStats), SteeringError> {
    for &layer in &opts.layers {
        if layer >= model.config.n_layers {
            return Err(SteeringError::LayerOutOfRange {
                layer,
                n_layers: model.config.n_layers,
            });
        }
    }
    let d = model.config.d_model;
    let acc = run_condition(model, accented, speakers, vocab, opts, rng)?;
    let neu = run_condition(model, neutral, speakers, vocab, opts, rng)?;

    let (acc_means, n_acc) = condition_mean(&acc, &opts.layers, d, "accented")?;
    let (neu_means, n_neu) = condition_mean(&neu, &opts.layers, d, "neutral")?;

    let stats = ExtractStats {
        n_accented_ok: n_acc,
        n_accented_failed: accented.len() - n_acc,
        n_neutral_ok: n_neu,
        n_neutral_failed: neutral.len() - n_neu,
    };

    let digest = model.digest();
    let vectors = opts
        .layers
        .iter()
        .zip(acc_means.iter().zip(&neu_means))
        .map(|(&layer, (a, n))| SteeringVector {
            layer,
            values: a.iter().zip(n).map(|(x, y)| x - y).collect(),
            meta: VectorMeta {
                n_accented: n_acc as u64,
                n_neutral: n_neu as u64,
                augment: opts.augment,
                checkpoint_digest: digest.clone(),
                extraction_seed: rng.seed(),
                created_unix: opts.timestamp.unwrap_or(0),
            },
        })
        .collect();
    Ok((
        VectorSet {
            d_model: d,
            vectors,
        },
        stats,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::micro_world;

    fn setup() -> (&'static Model, Vec<Triplet>, Vec<Triplet>, &'static [SpeakerProfile], Vocab) {
        let world = micro_world();
        let accented = world.triplets(4, true, 71);
        let neutral = world.triplets(4, false, 71);
        (&world.model, accented, neutral, &world.speakers, world.vocab)
    }

    #[test]
    fn identical_conditions_give_zero_vector() {
        // Same triplets in both slots share per-sample streams, so the
        // difference of means is exactly zero.
        let (model, accented, _, speakers, vocab) = setup();
        let opts = ExtractOptions::new(0..2, false);
        let rng = Rng::new(72, 0);
        let (set, _) =
            extract_vectors(model, &accented, &accented, &speakers, &vocab, &opts, &rng).unwrap();
        for v in &set.vectors {
            assert!(v.values.iter().all(|&x| x == 0.0), "layer {} non-zero", v.layer);
        }
    }

    #[test]
    fn single_sample_extraction_is_plain_difference() {
        let (model, accented, neutral, speakers, vocab) = setup();
        let opts = ExtractOptions::new(0..2, false);
        let rng = Rng::new(73, 0);
        let (set, stats) = extract_vectors(
            model,
            &accented[..1],
            &neutral[..1],
            &speakers,
            &vocab,
            &opts,
            &rng,
        )
        .unwrap();
        assert_eq!(stats.n_accented_ok, 1);
        assert_eq!(stats.n_neutral_ok, 1);

        let acc = run_condition(model, &accented[..1], &speakers, &vocab, &opts, &rng).unwrap();
        let neu = run_condition(model, &neutral[..1], &speakers, &vocab, &opts, &rng).unwrap();
        let a = acc[0].as_ref().unwrap();
        let n = neu[0].as_ref().unwrap();
        for (vi, v) in set.vectors.iter().enumerate() {
            for ((x, &am), &nm) in v.values.iter().zip(&a[vi].1).zip(&n[vi].1) {
                assert!((x - (am - nm)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn swapping_conditions_negates_vectors() {
        let (model, accented, neutral, speakers, vocab) = setup();
        let opts = ExtractOptions::new(0..2, false);
        let rng = Rng::new(74, 0);
        let (fwd, _) =
            extract_vectors(model, &accented, &neutral, &speakers, &vocab, &opts, &rng).unwrap();
        let (rev, _) =
            extract_vectors(model, &neutral, &accented, &speakers, &vocab, &opts, &rng).unwrap();
        for (f, r) in fwd.vectors.iter().zip(&rev.vectors) {
            for (x, y) in f.values.iter().zip(&r.values) {
                assert_eq!(*x, -*y, "antisymmetry must be exact");
            }
        }
    }

    #[test]
    fn all_failed_condition_is_an_error() {
        let (model, accented, neutral, speakers, vocab) = setup();
        // Budget 1: the single sampled token is fed and generation ends
        // unfinished unless that token happens to be STOP.
        let mut opts = ExtractOptions::new(0..2, false);
        opts.budget_factor = 0;
        opts.min_budget = 1;
        let rng = Rng::new(75, 0);
        let result = extract_vectors(model, &accented, &neutral, &speakers, &vocab, &opts, &rng);
        assert!(
            matches!(result, Err(SteeringError::AllSamplesFailed { .. })),
            "expected all-failed extraction error, got {result:?}"
        );
    }

    #[test]
    fn layer_out_of_range_rejected() {
        let (model, accented, neutral, speakers, vocab) = setup();
        let opts = ExtractOptions::new([7], false);
        let rng = Rng::new(76, 0);
        assert!(matches!(
            extract_vectors(model, &accented, &neutral, &speakers, &vocab, &opts, &rng),
            Err(SteeringError::LayerOutOfRange { .. })
        ));
    }

    #[test]
    fn extraction_linearity_over_disjoint_unions() {
        // Mean over a union equals the count-weighted mean of the parts.
        let (model, accented, _, speakers, vocab) = setup();
        let opts = ExtractOptions::new(0..2, false);
        let rng = Rng::new(77, 0);
        let all = run_condition(model, &accented, &speakers, &vocab, &opts, &rng).unwrap();
        let (mean_all, n_all) = condition_mean(&all, &opts.layers, 16, "accented").unwrap();

        let (left, right) = all.split_at(2);
        let (mean_l, n_l) = condition_mean(left, &opts.layers, 16, "accented").unwrap();
        let (mean_r, n_r) = condition_mean(right, &opts.layers, 16, "accented").unwrap();
        assert_eq!(n_all, n_l + n_r);
        for (slot, (l, r)) in mean_all.iter().zip(mean_l.iter().zip(&mean_r)) {
            for ((a, &x), &y) in slot.iter().zip(l).zip(r) {
                let weighted = (x * n_l as f64 + y * n_r as f64) / n_all as f64;
                assert!((a - weighted).abs() < 1e-12);
            }
        }
    }
}
