use super::EvalError;
use crate::numerics::Rng;
use crate::synth_task::Vocab;
use serde::{Deserialize, Serialize};

/// Accent classifier over a single feature: the accented-variant fraction of
/// a sequence's content tokens. Stand-in for the external pre-trained accent
/// classifier of the real evaluation stack.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttrClassifier {
    Threshold { threshold: f64 },
    Logistic { weight: f64, bias: f64 },
}

impl AttrClassifier {
    /// None when the sequence has no content tokens (malformed).
    pub fn classify_accented(&self, seq: &[usize], vocab: &Vocab) -> Option<bool> {
        let (fraction, _) = vocab.accented_fraction(seq)?;
        Some(self.decide(fraction))
    }

    pub fn decide(&self, fraction: f64) -> bool {
        match self {
            AttrClassifier::Threshold { threshold } => fraction >= *threshold,
            AttrClassifier::Logistic { weight, bias } => weight * fraction + bias >= 0.0,
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), EvalError> {
        std::fs::write(path, serde_json::to_string_pretty(self).expect("classifier json"))?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|_| EvalError::BadCsv(0))
    }
}

#[derive(Debug, Clone)]
pub struct ClassifierReport {
    pub classifier: AttrClassifier,
    pub held_out_accuracy: f64,
    pub n_train: usize,
    pub n_held_out: usize,
}

/// Logistic regression on the accented-fraction feature. Labels are true for
/// the accented class. Deterministic given the seed; 20% of the corpus is
/// held out for the accuracy report.
pub fn train_attr_classifier(
    corpus: &[(Vec<usize>, bool)],
    vocab: &Vocab,
    seed: u64,
) -> Result<ClassifierReport, EvalError> {
    if corpus.is_empty() {
        return Err(EvalError::EmptyInput("classifier corpus"));
    }
    let mut data: Vec<(f64, f64)> = Vec::with_capacity(corpus.len());
    for (seq, label) in corpus {
        if let Some((fraction, _)) = vocab.accented_fraction(seq) {
            data.push((fraction, f64::from(*label)));
        }
    }
    if data.iter().all(|(_, y)| *y == 1.0) || data.iter().all(|(_, y)| *y == 0.0) {
        return Err(EvalError::SingleClassCorpus);
    }

    let mut rng = Rng::new(seed, 0x636c66); // "clf"
    let mut order: Vec<usize> = (0..data.len()).collect();
    rng.shuffle(&mut order);
    let n_held = (data.len() / 5).max(1);
    let (held_idx, train_idx) = order.split_at(n_held);

    let mut weight = 0.0f64;
    let mut bias = 0.0f64;
    let lr = 2.0;
    for _ in 0..2000 {
        let mut gw = 0.0;
        let mut gb = 0.0;
        for &i in train_idx {
            let (x, y) = data[i];
            let p = 1.0 / (1.0 + (-(weight * x + bias)).exp());
            gw += (p - y) * x;
            gb += p - y;
        }
        let n = train_idx.len() as f64;
        weight -= lr * gw / n;
        bias -= lr * gb / n;
    }
    let classifier = AttrClassifier::Logistic { weight, bias };
    let correct = held_idx
        .iter()
        .filter(|&&i| classifier.decide(data[i].0) == (data[i].1 == 1.0))
        .count();
    Ok(ClassifierReport {
        classifier,
        held_out_accuracy: correct as f64 / held_idx.len() as f64,
        n_train: train_idx.len(),
        n_held_out: held_idx.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth_task::{make_speakers, render_utterance, AccentSpec, TaskConfig};

    fn labeled_corpus(shuffle_labels: bool, seed: u64) -> (Vec<(Vec<usize>, bool)>, Vocab) {
        let cfg = TaskConfig::default();
        let vocab = cfg.vocab();
        let mut rng = Rng::new(seed, 0);
        let speakers = make_speakers(2, &vocab, &mut rng).unwrap();
        let accented = AccentSpec::accented(&vocab, 0.9);
        let neutral = AccentSpec::neutral(&vocab);
        let mut corpus = Vec::new();
        for i in 0..200 {
            let text: Vec<usize> = (0..12).map(|_| rng.below(64)).collect();
            let spec = if i % 2 == 0 { &accented } else { &neutral };
            let seq = render_utterance(&text, &speakers[i % 2], spec, &vocab, &mut rng).unwrap();
            let label = if shuffle_labels {
                rng.uniform() < 0.5
            } else {
                i % 2 == 0
            };
            corpus.push((seq, label));
        }
        (corpus, vocab)
    }

    #[test]
    fn separable_corpus_reaches_high_accuracy() {
        let (corpus, vocab) = labeled_corpus(false, 81);
        let report = train_attr_classifier(&corpus, &vocab, 7).unwrap();
        assert!(
            report.held_out_accuracy >= 0.99,
            "accuracy {}",
            report.held_out_accuracy
        );
    }

    #[test]
    fn shuffled_labels_are_chance_level() {
        // Averaged over several shuffles to keep the check stable.
        let mut total = 0.0;
        let runs = 10;
        for s in 0..runs {
            let (corpus, vocab) = labeled_corpus(true, 90 + s);
            let report = train_attr_classifier(&corpus, &vocab, 7).unwrap();
            total += report.held_out_accuracy;
        }
        let mean = total / runs as f64;
        assert!((mean - 0.5).abs() <= 0.05, "mean accuracy {mean}");
    }

    #[test]
    fn same_seed_same_parameters() {
        let (corpus, vocab) = labeled_corpus(false, 82);
        let a = train_attr_classifier(&corpus, &vocab, 3).unwrap();
        let b = train_attr_classifier(&corpus, &vocab, 3).unwrap();
        match (a.classifier, b.classifier) {
            (
                AttrClassifier::Logistic { weight: w1, bias: b1 },
                AttrClassifier::Logistic { weight: w2, bias: b2 },
            ) => {
                assert_eq!(w1.to_bits(), w2.to_bits());
                assert_eq!(b1.to_bits(), b2.to_bits());
            }
            _ => panic!("expected logistic classifiers"),
        }
    }

    #[test]
    fn single_class_rejected() {
        let (mut corpus, vocab) = labeled_corpus(false, 83);
        for (_, label) in &mut corpus {
            *label = true;
        }
        assert!(matches!(
            train_attr_classifier(&corpus, &vocab, 1),
            Err(EvalError::SingleClassCorpus)
        ));
    }
}
