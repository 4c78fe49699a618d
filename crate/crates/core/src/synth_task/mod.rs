//! Synthetic contrastive corpus with two independently measurable latent
//! attributes per utterance:
//!
//! - "accent": each content word surfaces as a neutral or accented variant;
//! - "speaker timbre": one timbre symbol follows every content word, drawn
//!   from the speaker's distribution over a 16-symbol alphabet.
//!
//! A rendered utterance is `(variant, timbre)* STOP`, so both attributes are
//! recoverable by exact counting. Text is always written in canonical
//! (neutral-form) ids; accent information reaches the model only through
//! rendered reference sequences.

mod render;
mod sequences;
mod task;
mod triplets;
mod vocab;

pub use render::{perturb_reference, render_utterance};
pub use sequences::{assemble_prompt, assemble_training_sequence, CorpusRecord, TrainRecord};
pub use task::{make_speakers, AccentSpec, SpeakerProfile, TaskConfig};
pub use triplets::{build_triplets, SentencePool, Triplet};
pub use vocab::Vocab;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("content word {0} not in variant table of size {1}")]
    UnknownWord(usize, usize),
    #[error("malformed surface sequence at index {0}")]
    MalformedSequence(usize),
    #[error("sentence pool too small: {0} sentences, need at least {1}")]
    PoolTooSmall(usize, usize),
    #[error("need {need} speakers but the timbre alphabet has {have} symbols")]
    TooManySpeakers { need: usize, have: usize },
}
