//! Run configuration: one TOML file, every field optional, flags win over
//! file values. A single top-level seed feeds every subcommand through
//! fixed per-command streams.

use serde::Deserialize;
use std::path::{Path, PathBuf};
use steer_core::audio::PerturbConfig;
use steer_core::synth_task::TaskConfig;
use steer_core::transformer::{ModelConfig, TrainSchedule};

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub task: TaskSection,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub extract: ExtractSection,
    #[serde(default)]
    pub steer: SteerSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub audio: AudioSection,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_layers: Option<usize>,
    pub d_model: Option<usize>,
    pub n_heads: Option<usize>,
    pub d_ff: Option<usize>,
    pub max_seq_len: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub n_content_words: Option<usize>,
    pub n_timbre_symbols: Option<usize>,
    pub speakers_per_condition: Option<usize>,
    pub accent_prob: Option<f64>,
    pub sentence_len_min: Option<usize>,
    pub sentence_len_max: Option<usize>,
    pub dirichlet_kappa: Option<f64>,
    pub perturb_gate: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub n_sentences: Option<usize>,
    pub eval_fraction: Option<f64>,
    pub n_corpus: Option<usize>,
    pub n_train: Option<usize>,
    pub n_extract: Option<usize>,
    pub n_eval: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub warmup_steps: Option<usize>,
    pub log_every: Option<usize>,
    pub gate_amr: Option<f64>,
    pub gate_spk: Option<f64>,
    pub gate_chunk: Option<usize>,
    pub gate_probe: Option<usize>,
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExtractSection {
    pub n_samples: Option<usize>,
    /// "all" or comma-separated layer indices.
    pub layers: Option<String>,
    pub augment: Option<bool>,
    pub temperature: Option<f64>,
    pub budget_factor: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SteerSection {
    pub layer: Option<usize>,
    pub alpha: Option<f64>,
    pub direction: Option<String>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub layers: Option<String>,
    pub alphas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AudioSection {
    pub formant_lo: Option<f64>,
    pub formant_hi: Option<f64>,
    pub f0_lo: Option<f64>,
    pub f0_hi: Option<f64>,
    pub eq_bands: Option<usize>,
    pub eq_center_lo: Option<f64>,
    pub eq_center_hi: Option<f64>,
    pub eq_gain_db: Option<f64>,
    pub eq_q_lo: Option<f64>,
    pub eq_q_hi: Option<f64>,
    pub gate_threshold: Option<f64>,
    pub fft_size: Option<usize>,
    pub hop: Option<usize>,
}

/// Fully resolved configuration after merging file and defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub task: TaskConfig,
    pub model_template: ModelSection,
    pub corpus: CorpusValues,
    pub train: TrainValues,
    pub extract: ExtractValues,
    pub steer: SteerValues,
    pub sweep: SweepValues,
    pub audio: PerturbConfig,
    pub no_timestamp: bool,
}

#[derive(Debug, Clone)]
pub struct CorpusValues {
    pub n_sentences: usize,
    pub eval_fraction: f64,
    pub n_corpus: usize,
    pub n_train: usize,
    pub n_extract: usize,
    pub n_eval: usize,
}

#[derive(Debug, Clone)]
pub struct TrainValues {
    pub schedule: TrainSchedule,
    pub gate_amr: f64,
    pub gate_spk: f64,
    pub gate_chunk: usize,
    pub gate_probe: usize,
    pub max_steps: usize,
}

#[derive(Debug, Clone)]
pub struct ExtractValues {
    pub n_samples: usize,
    pub layers: String,
    pub augment: bool,
    pub temperature: f64,
    pub budget_factor: usize,
}

#[derive(Debug, Clone)]
pub struct SteerValues {
    pub layer: Option<usize>,
    pub alpha: f64,
    pub direction: String,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct SweepValues {
    pub layers: String,
    pub alphas: Vec<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<FileConfig> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", p.display()))?;
                Ok(toml::from_str(&text)?)
            }
        }
    }

    pub fn resolve(file: FileConfig, seed: Option<u64>, out_dir: Option<PathBuf>, no_timestamp: bool) -> Self {
        let t = &file.task;
        let task = TaskConfig {
            n_content_words: t.n_content_words.unwrap_or(64),
            n_timbre_symbols: t.n_timbre_symbols.unwrap_or(16),
            speakers_per_condition: t.speakers_per_condition.unwrap_or(4),
            accent_prob: t.accent_prob.unwrap_or(0.9),
            sentence_len_min: t.sentence_len_min.unwrap_or(8),
            sentence_len_max: t.sentence_len_max.unwrap_or(20),
            dirichlet_kappa: t.dirichlet_kappa.unwrap_or(20.0),
            perturb_gate: t.perturb_gate.unwrap_or(0.3),
        };
        let seed = seed.or(file.seed).unwrap_or(42);
        let c = &file.corpus;
        let corpus = CorpusValues {
            n_sentences: c.n_sentences.unwrap_or(800),
            eval_fraction: c.eval_fraction.unwrap_or(0.1),
            n_corpus: c.n_corpus.unwrap_or(2000),
            n_train: c.n_train.unwrap_or(8000),
            n_extract: c.n_extract.unwrap_or(4000),
            n_eval: c.n_eval.unwrap_or(400),
        };
        let tr = &file.train;
        let train = TrainValues {
            schedule: TrainSchedule {
                steps: tr.steps.unwrap_or(1200),
                batch_size: tr.batch_size.unwrap_or(16),
                lr: tr.lr.unwrap_or(1.5e-3),
                warmup_steps: tr.warmup_steps.unwrap_or(100),
                seed,
                log_every: tr.log_every.unwrap_or(50),
            },
            gate_amr: tr.gate_amr.unwrap_or(0.8),
            gate_spk: tr.gate_spk.unwrap_or(0.9),
            gate_chunk: tr.gate_chunk.unwrap_or(300),
            gate_probe: tr.gate_probe.unwrap_or(60),
            max_steps: tr.max_steps.unwrap_or(4800),
        };
        let e = &file.extract;
        let extract = ExtractValues {
            n_samples: e.n_samples.unwrap_or(4000),
            layers: e.layers.clone().unwrap_or_else(|| "all".into()),
            augment: e.augment.unwrap_or(true),
            temperature: e.temperature.unwrap_or(1.0),
            budget_factor: e.budget_factor.unwrap_or(4),
        };
        let s = &file.steer;
        let steer = SteerValues {
            layer: s.layer,
            alpha: s.alpha.unwrap_or(1.0),
            direction: s.direction.clone().unwrap_or_else(|| "subtract".into()),
            epsilon: s.epsilon.unwrap_or(1e-8),
        };
        let sw = &file.sweep;
        let sweep = SweepValues {
            layers: sw.layers.clone().unwrap_or_else(|| "all".into()),
            alphas: sw.alphas.clone().unwrap_or_else(|| vec![1.0, 2.0]),
        };
        let a = &file.audio;
        let mut audio = PerturbConfig::default();
        if let (Some(lo), Some(hi)) = (a.formant_lo, a.formant_hi) {
            audio.formant_range = (lo, hi);
        }
        if let (Some(lo), Some(hi)) = (a.f0_lo, a.f0_hi) {
            audio.f0_range = (lo, hi);
        }
        if let Some(n) = a.eq_bands {
            audio.eq_bands = n;
        }
        if let (Some(lo), Some(hi)) = (a.eq_center_lo, a.eq_center_hi) {
            audio.eq_center_range = (lo, hi);
        }
        if let Some(g) = a.eq_gain_db {
            audio.eq_gain_db_range = (-g, g);
        }
        if let (Some(lo), Some(hi)) = (a.eq_q_lo, a.eq_q_hi) {
            audio.eq_q_range = (lo, hi);
        }
        if let Some(g) = a.gate_threshold {
            audio.gate_threshold = g;
        }
        if let Some(n) = a.fft_size {
            audio.stft.fft_size = n;
        }
        if let Some(h) = a.hop {
            audio.stft.hop = h;
        }

        RunConfig {
            seed,
            out_dir: out_dir.or(file.out_dir).unwrap_or_else(|| PathBuf::from("run")),
            task,
            model_template: file.model,
            corpus,
            train,
            extract,
            steer,
            sweep,
            audio,
            no_timestamp,
        }
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        let m = &self.model_template;
        ModelConfig {
            n_layers: m.n_layers.unwrap_or(4),
            d_model: m.d_model.unwrap_or(64),
            n_heads: m.n_heads.unwrap_or(4),
            d_ff: m.d_ff.unwrap_or(256),
            vocab_size,
            max_seq_len: m.max_seq_len.unwrap_or(256),
            seed: self.seed,
        }
    }

    /// "all" or a comma-separated list, bounded by the layer count.
    pub fn parse_layers(spec: &str, n_layers: usize) -> anyhow::Result<Vec<usize>> {
        if spec.trim() == "all" {
            return Ok((0..n_layers).collect());
        }
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| anyhow::anyhow!("bad layer list entry {s:?}"))
            })
            .collect()
    }

    pub fn timestamp(&self) -> Option<u64> {
        if self.no_timestamp {
            None
        } else {
            Some(
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            )
        }
    }
}
