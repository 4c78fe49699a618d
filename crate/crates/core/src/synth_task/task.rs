use super::{TaskError, Vocab};
use crate::numerics::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskConfig {
    pub n_content_words: usize,
    pub n_timbre_symbols: usize,
    pub speakers_per_condition: usize,
    /// Accented-condition emission probability for accented variants.
    pub accent_prob: f64,
    pub sentence_len_min: usize,
    pub sentence_len_max: usize,
    /// Dirichlet concentration for reference perturbation; larger is milder.
    pub dirichlet_kappa: f64,
    /// Perturbation applies only when a uniform draw exceeds this gate.
    pub perturb_gate: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            n_content_words: 64,
            n_timbre_symbols: 16,
            speakers_per_condition: 4,
            accent_prob: 0.9,
            sentence_len_min: 8,
            sentence_len_max: 20,
            dirichlet_kappa: 20.0,
            perturb_gate: 0.3,
        }
    }
}

impl TaskConfig {
    pub fn vocab(&self) -> Vocab {
        Vocab::new(self.n_content_words, self.n_timbre_symbols)
    }
}

/// Emission probabilities for the accent attribute plus the per-word
/// (neutral id, accented id) variant table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccentSpec {
    pub accent_prob: f64,
    pub variant_table: Vec<(usize, usize)>,
}

impl AccentSpec {
    pub fn new(vocab: &Vocab, accent_prob: f64) -> Self {
        let variant_table = (0..vocab.n_content_words)
            .map(|w| (vocab.neutral_id(w), vocab.accented_id(w)))
            .collect();
        AccentSpec {
            accent_prob,
            variant_table,
        }
    }

    pub fn neutral(vocab: &Vocab) -> Self {
        Self::new(vocab, 0.0)
    }

    pub fn accented(vocab: &Vocab, p: f64) -> Self {
        Self::new(vocab, p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeakerProfile {
    pub speaker_id: usize,
    /// Categorical distribution over the timbre alphabet; sums to 1.
    pub timbre_dist: Vec<f64>,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Builds `n` speakers with pairwise cosine-distinct timbre distributions.
/// Each speaker concentrates on a dominant symbol (0.80..0.88 of the mass)
/// plus a secondary symbol carrying the rest; symbols are permuted so
/// supports do not collide across speakers when the alphabet allows
/// (2n <= alphabet), which keeps short-utterance histograms close to the
/// distribution and distinct speakers far apart.
pub fn make_speakers(n: usize, vocab: &Vocab, rng: &mut Rng) -> Result<Vec<SpeakerProfile>, TaskError> {
    let alphabet = vocab.n_timbre_symbols;
    if n > alphabet {
        return Err(TaskError::TooManySpeakers {
            need: n,
            have: alphabet,
        });
    }
    let mut perm: Vec<usize> = (0..alphabet).collect();
    rng.shuffle(&mut perm);

    let mut speakers = Vec::with_capacity(n);
    for speaker_id in 0..n {
        let dominant = perm[speaker_id];
        let secondary = if 2 * n <= alphabet {
            perm[n + speaker_id]
        } else {
            perm[(speaker_id + 1) % n]
        };
        let weight = rng.uniform_in(0.80, 0.88);
        let mut dist = vec![0.0; alphabet];
        dist[dominant] = weight;
        dist[secondary] += 1.0 - weight;
        speakers.push(SpeakerProfile {
            speaker_id,
            timbre_dist: dist,
        });
    }
    for a in &speakers {
        for b in &speakers {
            if a.speaker_id != b.speaker_id {
                debug_assert!(cosine(&a.timbre_dist, &b.timbre_dist) <= 0.85);
            }
        }
    }
    Ok(speakers)
}
