use super::{AccentSpec, SpeakerProfile, TaskError, Vocab};
use crate::numerics::Rng;

/// Renders a text (canonical word indices) as a surface sequence: for each
/// word, the accented variant with probability `accent.accent_prob`, else
/// the neutral one, followed by a timbre symbol drawn from the speaker's
/// distribution; terminated by STOP. Length is exactly 2*len(text)+1.
pub fn render_utterance(
    text: &[usize],
    speaker: &SpeakerProfile,
    accent: &AccentSpec,
    vocab: &Vocab,
    rng: &mut Rng,
) -> Result<Vec<usize>, TaskError> {
    let mut out = Vec::with_capacity(2 * text.len() + 1);
    for &word in text {
        let (neutral, accented) = *accent
            .variant_table
            .get(word)
            .ok_or(TaskError::UnknownWord(word, accent.variant_table.len()))?;
        let id = if rng.uniform() < accent.accent_prob {
            accented
        } else {
            neutral
        };
        out.push(id);
        out.push(vocab.timbre_id(rng.categorical(&speaker.timbre_dist)));
    }
    out.push(Vocab::STOP);
    Ok(out)
}

fn check_well_formed(seq: &[usize], vocab: &Vocab) -> Result<(), TaskError> {
    if seq.is_empty() || *seq.last().unwrap() != Vocab::STOP {
        return Err(TaskError::MalformedSequence(seq.len().saturating_sub(1)));
    }
    let body = &seq[..seq.len() - 1];
    if body.len() % 2 != 0 {
        return Err(TaskError::MalformedSequence(body.len()));
    }
    for (i, &id) in body.iter().enumerate() {
        let ok = if i % 2 == 0 {
            vocab.is_content(id)
        } else {
            vocab.is_timbre(id)
        };
        if !ok {
            return Err(TaskError::MalformedSequence(i));
        }
    }
    Ok(())
}

/// Speaker perturbation for the synthetic domain: with probability 0.7
/// (gamma ~ U(0,1) must exceed the gate, default 0.3) every timbre symbol is
/// resampled from a Dirichlet(kappa * timbre_dist) jitter of the speaker's
/// distribution. Content tokens are never altered, so the accent attribute
/// is exactly invariant; below the gate the input passes through unchanged.
pub fn perturb_reference(
    seq: &[usize],
    speaker: &SpeakerProfile,
    kappa: f64,
    gate: f64,
    vocab: &Vocab,
    rng: &mut Rng,
) -> Result<Vec<usize>, TaskError> {
    check_well_formed(seq, vocab)?;
    let gamma = rng.uniform();
    if gamma <= gate {
        return Ok(seq.to_vec());
    }
    let alpha: Vec<f64> = speaker
        .timbre_dist
        .iter()
        .map(|&p| (kappa * p).max(1e-6))
        .collect();
    let jittered = rng.dirichlet(&alpha);
    let mut out = seq.to_vec();
    for id in &mut out {
        if vocab.is_timbre(*id) {
            *id = vocab.timbre_id(rng.categorical(&jittered));
        }
    }
    Ok(out)
}
