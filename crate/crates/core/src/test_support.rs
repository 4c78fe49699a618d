//! Shared fixtures for unit tests: a micro task and a model trained just
//! far enough that generations terminate reliably. Built once per test
//! binary.

use crate::numerics::Rng;
use crate::synth_task::{
    assemble_training_sequence, build_triplets, make_speakers, render_utterance, AccentSpec,
    SentencePool, SpeakerProfile, TaskConfig, TrainRecord, Triplet, Vocab,
};
use crate::transformer::{new_opt_state, train, Model, ModelConfig, TrainSchedule, TrainSequence};
use std::sync::OnceLock;

pub struct MicroWorld {
    pub task: TaskConfig,
    pub vocab: Vocab,
    pub speakers: Vec<SpeakerProfile>,
    pub pool: SentencePool,
    pub model: Model,
}

impl MicroWorld {
    pub fn accented_spec(&self) -> AccentSpec {
        AccentSpec::accented(&self.vocab, self.task.accent_prob)
    }

    pub fn neutral_spec(&self) -> AccentSpec {
        AccentSpec::neutral(&self.vocab)
    }

    /// Neutral speakers come first, accented second, as in the corpus
    /// builder: ids [0, per_condition) neutral, [per_condition, 2p) accented.
    pub fn neutral_speakers(&self) -> &[SpeakerProfile] {
        &self.speakers[..self.task.speakers_per_condition]
    }

    pub fn accented_speakers(&self) -> &[SpeakerProfile] {
        &self.speakers[self.task.speakers_per_condition..]
    }

    pub fn triplets(&self, n: usize, accented: bool, pair_seed: u64) -> Vec<Triplet> {
        let spec = if accented {
            self.accented_spec()
        } else {
            self.neutral_spec()
        };
        let speakers = if accented {
            self.accented_speakers()
        } else {
            self.neutral_speakers()
        };
        build_triplets(n, speakers, &spec, &self.pool, &self.vocab, &Rng::new(pair_seed, 0))
            .expect("micro triplets")
    }
}

fn build() -> MicroWorld {
    let task = TaskConfig {
        n_content_words: 8,
        n_timbre_symbols: 8,
        speakers_per_condition: 2,
        accent_prob: 0.9,
        sentence_len_min: 3,
        sentence_len_max: 6,
        dirichlet_kappa: 20.0,
        perturb_gate: 0.3,
    };
    let vocab = task.vocab();
    let mut rng = Rng::new(0xfeed, 0);
    let speakers = make_speakers(4, &vocab, &mut rng).unwrap();
    let pool = SentencePool::generate(24, &task, &mut rng).unwrap();

    // Teacher-forcing corpus over both conditions.
    let mut corpus: Vec<TrainSequence> = Vec::new();
    let accented = AccentSpec::accented(&vocab, task.accent_prob);
    let neutral = AccentSpec::neutral(&vocab);
    for i in 0..96usize {
        let speaker = &speakers[i % 4];
        let spec = if i % 4 >= 2 { &accented } else { &neutral };
        let accent_prob = spec.accent_prob;
        let target = pool.targets[rng.below(pool.targets.len())].clone();
        let reference = pool.references[rng.below(pool.references.len())].clone();
        let ref_surface = render_utterance(&reference, speaker, spec, &vocab, &mut rng).unwrap();
        let surface = render_utterance(&target, speaker, spec, &vocab, &mut rng).unwrap();
        let record = TrainRecord {
            speaker_id: speaker.speaker_id,
            accent_prob,
            text: target,
            surface,
            ref_text: reference,
            ref_surface,
        };
        corpus.push(assemble_training_sequence(&vocab, &record));
    }

    let config = ModelConfig {
        n_layers: 2,
        d_model: 16,
        n_heads: 2,
        d_ff: 32,
        vocab_size: vocab.size(),
        max_seq_len: 128,
        seed: 0xfeed,
    };
    let mut model = Model::new(config).unwrap();
    let schedule = TrainSchedule {
        steps: 300,
        batch_size: 8,
        lr: 3e-3,
        warmup_steps: 20,
        seed: 0xfeed,
        log_every: 100,
    };
    let mut opt = new_opt_state(&model);
    train(&mut model, &corpus, &schedule, &mut opt, 0).expect("micro training");
    MicroWorld {
        task,
        vocab,
        speakers,
        pool,
        model,
    }
}

pub fn micro_world() -> &'static MicroWorld {
    static WORLD: OnceLock<MicroWorld> = OnceLock::new();
    WORLD.get_or_init(build)
}
