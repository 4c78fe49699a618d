use super::{AttrClassifier, EvalError};
use crate::synth_task::Vocab;
use crate::transformer::GenerationResult;

/// Fraction of generations that emitted a stop token within budget.
pub fn isr(results: &[GenerationResult]) -> Result<f64, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyInput("isr"));
    }
    let ok = results.iter().filter(|r| r.ok()).count();
    Ok(ok as f64 / results.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrTarget {
    Accented,
    Neutral,
}

#[derive(Debug, Clone, Copy)]
pub struct AmrResult {
    pub fraction: f64,
    /// Sequences without content tokens; they count as non-matches.
    pub malformed: usize,
}

/// Fraction of sequences the classifier assigns to the target class.
pub fn amr(
    sequences: &[Vec<usize>],
    clf: &AttrClassifier,
    target: AttrTarget,
    vocab: &Vocab,
) -> Result<AmrResult, EvalError> {
    if sequences.is_empty() {
        return Err(EvalError::EmptyInput("amr"));
    }
    let mut matches = 0usize;
    let mut malformed = 0usize;
    for seq in sequences {
        match clf.classify_accented(seq, vocab) {
            Some(accented) => {
                let is_match = match target {
                    AttrTarget::Accented => accented,
                    AttrTarget::Neutral => !accented,
                };
                if is_match {
                    matches += 1;
                }
            }
            None => malformed += 1,
        }
    }
    Ok(AmrResult {
        fraction: matches as f64 / sequences.len() as f64,
        malformed,
    })
}

/// L2-normalized histogram over the timbre alphabet.
pub fn speaker_embedding(seq: &[usize], vocab: &Vocab) -> Result<Vec<f64>, EvalError> {
    let hist = vocab.timbre_histogram(seq);
    let norm: f64 = hist.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(EvalError::NoTimbreSymbols);
    }
    Ok(hist.into_iter().map(|x| x / norm).collect())
}

pub fn cosine_sim(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Levenshtein distance (substitution + insertion + deletion, unit costs).
pub fn levenshtein(a: &[usize], b: &[usize]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ai) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &bj) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ai != bj);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance between canonical content-word sequences divided by the
/// reference length; may exceed 1.
pub fn content_error_rate(hyp: &[usize], reference: &[usize]) -> Result<f64, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyInput("content_error_rate reference"));
    }
    Ok(levenshtein(hyp, reference) as f64 / reference.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transformer::{GenerationResult, GenerationStatus};

    fn fake_result(ok: bool) -> GenerationResult {
        GenerationResult {
            tokens: vec![0],
            status: if ok {
                GenerationStatus::Ok
            } else {
                GenerationStatus::BudgetExhausted
            },
            trace: None,
            steps_used: 1,
        }
    }

    #[test]
    fn isr_counts_exactly() {
        let all_ok: Vec<_> = (0..4).map(|_| fake_result(true)).collect();
        assert_eq!(isr(&all_ok).unwrap(), 1.0);
        let mixed = vec![
            fake_result(true),
            fake_result(false),
            fake_result(true),
            fake_result(true),
        ];
        assert_eq!(isr(&mixed).unwrap(), 0.75);
        assert!(matches!(isr(&[]), Err(EvalError::EmptyInput(_))));
    }

    #[test]
    fn amr_saturated_inputs() {
        let vocab = Vocab::new(8, 4);
        let clf = AttrClassifier::Threshold { threshold: 0.5 };
        let all_accented: Vec<Vec<usize>> = (0..5)
            .map(|_| vec![vocab.accented_id(1), vocab.timbre_id(0), Vocab::STOP])
            .collect();
        let all_neutral: Vec<Vec<usize>> = (0..5)
            .map(|_| vec![vocab.neutral_id(1), vocab.timbre_id(0), Vocab::STOP])
            .collect();
        assert_eq!(amr(&all_accented, &clf, AttrTarget::Accented, &vocab).unwrap().fraction, 1.0);
        assert_eq!(amr(&all_neutral, &clf, AttrTarget::Accented, &vocab).unwrap().fraction, 0.0);
        assert_eq!(amr(&all_neutral, &clf, AttrTarget::Neutral, &vocab).unwrap().fraction, 1.0);
    }

    #[test]
    fn amr_is_scale_free_and_tallies_malformed() {
        let vocab = Vocab::new(8, 4);
        let clf = AttrClassifier::Threshold { threshold: 0.5 };
        let mut seqs: Vec<Vec<usize>> = vec![
            vec![vocab.accented_id(1), vocab.timbre_id(0), Vocab::STOP],
            vec![vocab.neutral_id(2), vocab.timbre_id(1), Vocab::STOP],
            vec![Vocab::STOP], // malformed: no content tokens
        ];
        let once = amr(&seqs, &clf, AttrTarget::Accented, &vocab).unwrap();
        let doubled: Vec<Vec<usize>> = seqs.iter().chain(seqs.iter()).cloned().collect();
        let twice = amr(&doubled, &clf, AttrTarget::Accented, &vocab).unwrap();
        assert!((once.fraction - twice.fraction).abs() < 1e-12);
        assert_eq!(once.malformed, 1);
        assert_eq!(twice.malformed, 2);
        seqs.pop();
    }

    #[test]
    fn embedding_self_similarity_is_one() {
        let vocab = Vocab::new(8, 4);
        let seq = vec![
            vocab.neutral_id(0),
            vocab.timbre_id(0),
            vocab.neutral_id(1),
            vocab.timbre_id(2),
            Vocab::STOP,
        ];
        let e = speaker_embedding(&seq, &vocab).unwrap();
        assert!((cosine_sim(&e, &e) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_timbre_supports_are_orthogonal() {
        let vocab = Vocab::new(8, 4);
        let a = vec![vocab.neutral_id(0), vocab.timbre_id(0), Vocab::STOP];
        let b = vec![vocab.neutral_id(0), vocab.timbre_id(3), Vocab::STOP];
        let ea = speaker_embedding(&a, &vocab).unwrap();
        let eb = speaker_embedding(&b, &vocab).unwrap();
        assert_eq!(cosine_sim(&ea, &eb), 0.0);
    }

    #[test]
    fn embedding_requires_timbre() {
        let vocab = Vocab::new(8, 4);
        assert!(matches!(
            speaker_embedding(&[vocab.neutral_id(0), Vocab::STOP], &vocab),
            Err(EvalError::NoTimbreSymbols)
        ));
    }

    #[test]
    fn cer_cases() {
        assert_eq!(content_error_rate(&[1, 2, 3], &[1, 2, 3]).unwrap(), 0.0);
        assert!((content_error_rate(&[1, 9, 3], &[1, 2, 3]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(content_error_rate(&[], &[1, 2, 3, 4, 5]).unwrap(), 1.0);
        assert!(content_error_rate(&[1], &[]).is_err());
        // Can exceed 1 with a long hypothesis.
        assert!(content_error_rate(&[7, 8, 9, 1, 2], &[3]).unwrap() > 1.0);
    }

    #[test]
    fn cer_single_substitution_steps_by_inverse_ref_len() {
        let reference = vec![4, 5, 6, 7];
        let mut hyp = reference.clone();
        let base = content_error_rate(&hyp, &reference).unwrap();
        hyp[2] = 99;
        let bumped = content_error_rate(&hyp, &reference).unwrap();
        assert!((bumped - base - 0.25).abs() < 1e-12);
    }
}
