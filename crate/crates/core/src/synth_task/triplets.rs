use super::{render_utterance, AccentSpec, SpeakerProfile, TaskConfig, TaskError, Vocab};
use crate::numerics::Rng;
use serde::{Deserialize, Serialize};

/// Generation input mirroring a zero-shot TTS request: synthesize
/// `target_text` in the voice (and accent) demonstrated by
/// `reference_sequence`, the rendering of `reference_text`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Triplet {
    /// Canonical word indices, drawn from the target half of the pool.
    pub target_text: Vec<usize>,
    /// Canonical word indices, drawn from the disjoint reference half.
    pub reference_text: Vec<usize>,
    /// Surface rendering of `reference_text` under speaker and accent.
    pub reference_sequence: Vec<usize>,
    pub speaker_id: usize,
    pub accent_prob: f64,
}

/// Two disjoint sentence sets; targets never appear as references.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SentencePool {
    pub targets: Vec<Vec<usize>>,
    pub references: Vec<Vec<usize>>,
}

impl SentencePool {
    /// Random sentences (uniform words, uniform length in the configured
    /// range), shuffled and split into two disjoint halves.
    pub fn generate(n_sentences: usize, cfg: &TaskConfig, rng: &mut Rng) -> Result<Self, TaskError> {
        if n_sentences < 2 {
            return Err(TaskError::PoolTooSmall(n_sentences, 2));
        }
        let mut sentences: Vec<Vec<usize>> = (0..n_sentences)
            .map(|_| {
                let len = cfg.sentence_len_min
                    + rng.below(cfg.sentence_len_max - cfg.sentence_len_min + 1);
                (0..len).map(|_| rng.below(cfg.n_content_words)).collect()
            })
            .collect();
        rng.shuffle(&mut sentences);
        let references = sentences.split_off(n_sentences / 2);
        Ok(SentencePool {
            targets: sentences,
            references,
        })
    }
}

/// Builds `n` triplets for one accent condition: target sentences cycle
/// round-robin, references are drawn from the disjoint reference half, and
/// speakers rotate round-robin. The pairing draws come from a child stream
/// that does not depend on the speakers or the accent, so calling this twice
/// with the same rng but different conditions yields the same text pairs
/// with per-condition renderings.
pub fn build_triplets(
    n: usize,
    speakers: &[SpeakerProfile],
    accent: &AccentSpec,
    pool: &SentencePool,
    vocab: &Vocab,
    rng: &Rng,
) -> Result<Vec<Triplet>, TaskError> {
    if pool.targets.is_empty() || pool.references.is_empty() {
        return Err(TaskError::PoolTooSmall(
            pool.targets.len() + pool.references.len(),
            2,
        ));
    }
    assert!(!speakers.is_empty(), "need at least one speaker");
    let mut pairing_rng = rng.child(1);
    let mut triplets = Vec::with_capacity(n);
    for i in 0..n {
        let target = pool.targets[i % pool.targets.len()].clone();
        let reference = pool.references[pairing_rng.below(pool.references.len())].clone();
        let speaker = &speakers[i % speakers.len()];
        let mut render_rng = rng.child(2 + i as u64);
        let rendered = render_utterance(&reference, speaker, accent, vocab, &mut render_rng)?;
        triplets.push(Triplet {
            target_text: target,
            reference_text: reference,
            reference_sequence: rendered,
            speaker_id: speaker.speaker_id,
            accent_prob: accent.accent_prob,
        });
    }
    Ok(triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth_task::make_speakers;

    fn setup() -> (TaskConfig, Vocab, Vec<SpeakerProfile>, SentencePool) {
        let cfg = TaskConfig::default();
        let vocab = cfg.vocab();
        let mut rng = Rng::new(60, 0);
        let speakers = make_speakers(4, &vocab, &mut rng).unwrap();
        let pool = SentencePool::generate(100, &cfg, &mut rng).unwrap();
        (cfg, vocab, speakers, pool)
    }

    #[test]
    fn target_and_reference_sets_are_disjoint() {
        let (_, vocab, speakers, pool) = setup();
        let accent = AccentSpec::accented(&vocab, 0.9);
        let rng = Rng::new(61, 0);
        let triplets = build_triplets(1, &speakers, &accent, &pool, &vocab, &rng).unwrap();
        let t = &triplets[0];
        assert!(!pool.references.contains(&t.target_text));
        assert!(!pool.targets.contains(&t.reference_text));
        assert_ne!(t.target_text, t.reference_text);
    }

    #[test]
    fn default_extraction_budget_builds() {
        let (_, vocab, speakers, pool) = setup();
        let accent = AccentSpec::accented(&vocab, 0.9);
        let rng = Rng::new(62, 0);
        let triplets = build_triplets(4000, &speakers, &accent, &pool, &vocab, &rng).unwrap();
        assert_eq!(triplets.len(), 4000);
        // Speakers rotate round-robin.
        for (i, t) in triplets.iter().enumerate() {
            assert_eq!(t.speaker_id, speakers[i % 4].speaker_id);
        }
    }

    #[test]
    fn same_seed_same_triplets() {
        let (_, vocab, speakers, pool) = setup();
        let accent = AccentSpec::accented(&vocab, 0.9);
        let a = build_triplets(50, &speakers, &accent, &pool, &vocab, &Rng::new(63, 0)).unwrap();
        let b = build_triplets(50, &speakers, &accent, &pool, &vocab, &Rng::new(63, 0)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.target_text, y.target_text);
            assert_eq!(x.reference_sequence, y.reference_sequence);
        }
    }

    #[test]
    fn conditions_share_text_pairs() {
        // Same parent stream, different speakers/accent: the text pairing is
        // identical, only the renderings differ.
        let (_, vocab, speakers, pool) = setup();
        let rng = Rng::new(64, 0);
        let accented = AccentSpec::accented(&vocab, 0.9);
        let neutral = AccentSpec::neutral(&vocab);
        let a = build_triplets(20, &speakers[..2], &accented, &pool, &vocab, &rng).unwrap();
        let b = build_triplets(20, &speakers[2..], &neutral, &pool, &vocab, &rng).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.target_text, y.target_text);
            assert_eq!(x.reference_text, y.reference_text);
        }
    }

    #[test]
    fn pool_too_small_rejected() {
        let cfg = TaskConfig::default();
        let mut rng = Rng::new(65, 0);
        assert!(matches!(
            SentencePool::generate(1, &cfg, &mut rng),
            Err(TaskError::PoolTooSmall(1, 2))
        ));
    }
}
