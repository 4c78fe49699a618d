use super::Vocab;
use crate::transformer::TrainSequence;
use serde::{Deserialize, Serialize};

/// One rendered utterance; the corpus file holds one of these per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub speaker_id: usize,
    pub accent_prob: f64,
    /// Canonical word indices of the text.
    pub text: Vec<usize>,
    /// Surface token ids of the rendering.
    pub surface: Vec<usize>,
}

/// One teacher-forcing example: the target rendition plus the reference
/// pair that conditions it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRecord {
    pub speaker_id: usize,
    pub accent_prob: f64,
    pub text: Vec<usize>,
    pub surface: Vec<usize>,
    pub ref_text: Vec<usize>,
    pub ref_surface: Vec<usize>,
}

/// Model input layout:
/// `ref_text SEP ref_surface SEP target_text GEN [generated...]`.
/// Text words are embedded in canonical (neutral-variant) form.
pub fn assemble_prompt(
    vocab: &Vocab,
    ref_text: &[usize],
    ref_surface: &[usize],
    target_text: &[usize],
) -> Vec<usize> {
    let mut prompt =
        Vec::with_capacity(ref_text.len() + ref_surface.len() + target_text.len() + 3);
    prompt.extend(ref_text.iter().map(|&w| vocab.neutral_id(w)));
    prompt.push(Vocab::SEP);
    prompt.extend_from_slice(ref_surface);
    prompt.push(Vocab::SEP);
    prompt.extend(target_text.iter().map(|&w| vocab.neutral_id(w)));
    prompt.push(Vocab::GEN);
    prompt
}

/// Prompt plus the teacher-forced target surface; gen_start marks the first
/// target-surface position.
pub fn assemble_training_sequence(vocab: &Vocab, record: &TrainRecord) -> TrainSequence {
    let mut tokens = assemble_prompt(vocab, &record.ref_text, &record.ref_surface, &record.text);
    let gen_start = tokens.len();
    tokens.extend_from_slice(&record.surface);
    TrainSequence { tokens, gen_start }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_layout() {
        let vocab = Vocab::new(8, 4);
        let prompt = assemble_prompt(&vocab, &[1, 2], &[vocab.accented_id(3), vocab.timbre_id(0), Vocab::STOP], &[4]);
        assert_eq!(
            prompt,
            vec![
                vocab.neutral_id(1),
                vocab.neutral_id(2),
                Vocab::SEP,
                vocab.accented_id(3),
                vocab.timbre_id(0),
                Vocab::STOP,
                Vocab::SEP,
                vocab.neutral_id(4),
                Vocab::GEN,
            ]
        );
    }

    #[test]
    fn training_sequence_marks_gen_start() {
        let vocab = Vocab::new(8, 4);
        let record = TrainRecord {
            speaker_id: 0,
            accent_prob: 0.0,
            text: vec![5],
            surface: vec![vocab.neutral_id(5), vocab.timbre_id(1), Vocab::STOP],
            ref_text: vec![2, 3],
            ref_surface: vec![
                vocab.neutral_id(2),
                vocab.timbre_id(0),
                vocab.neutral_id(3),
                vocab.timbre_id(0),
                Vocab::STOP,
            ],
        };
        let seq = assemble_training_sequence(&vocab, &record);
        assert_eq!(seq.gen_start, 2 + 1 + 5 + 1 + 1 + 1);
        assert_eq!(seq.tokens[seq.gen_start], vocab.neutral_id(5));
        assert_eq!(*seq.tokens.last().unwrap(), Vocab::STOP);
    }
}
