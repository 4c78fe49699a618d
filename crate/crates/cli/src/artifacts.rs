//! On-disk artifact layout and JSONL helpers. Every artifact is identified
//! by its SHA-256 digest in the command summaries.

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use steer_core::synth_task::{SpeakerProfile, TaskConfig, Vocab};

pub struct Layout {
    pub out_dir: PathBuf,
}

impl Layout {
    pub fn new(out_dir: &Path) -> Self {
        Layout {
            out_dir: out_dir.to_path_buf(),
        }
    }

    pub fn task(&self) -> PathBuf {
        self.out_dir.join("task.json")
    }
    pub fn corpus(&self) -> PathBuf {
        self.out_dir.join("corpus.jsonl")
    }
    pub fn train_records(&self) -> PathBuf {
        self.out_dir.join("train.jsonl")
    }
    pub fn triplets(&self, split: &str, condition: &str) -> PathBuf {
        self.out_dir.join(format!("triplets_{split}_{condition}.jsonl"))
    }
    pub fn classifier(&self) -> PathBuf {
        self.out_dir.join("classifier.json")
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.out_dir.join("checkpoint.bin")
    }
    pub fn loss_curve(&self) -> PathBuf {
        self.out_dir.join("loss_curve.csv")
    }
    pub fn vectors(&self) -> PathBuf {
        self.out_dir.join("vectors.stv")
    }
    pub fn vectors_json(&self) -> PathBuf {
        self.out_dir.join("vectors.json")
    }
    pub fn generations(&self) -> PathBuf {
        self.out_dir.join("generations.jsonl")
    }
    pub fn sweep_csv(&self) -> PathBuf {
        self.out_dir.join("sweep.csv")
    }
    pub fn evaluate_csv(&self) -> PathBuf {
        self.out_dir.join("evaluate.csv")
    }
    pub fn report_csv(&self) -> PathBuf {
        self.out_dir.join("report.csv")
    }
    pub fn report_json(&self) -> PathBuf {
        self.out_dir.join("report.json")
    }
    pub fn summary(&self, command: &str) -> PathBuf {
        self.out_dir.join(format!("{command}_summary.json"))
    }
}

/// Task manifest: the one file every downstream command reads first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskManifest {
    pub task: TaskConfig,
    pub speakers: Vec<SpeakerProfile>,
    pub vocab_size: usize,
}

impl TaskManifest {
    pub fn vocab(&self) -> Vocab {
        self.task.vocab()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("missing task manifest {}; run gen-corpus first", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("missing artifact {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).with_context(|| format!("parsing {}", path.display())))
        .collect()
}

pub fn digest_of(path: &Path) -> Result<String> {
    Ok(steer_core::numerics::file_digest(path)?)
}

pub fn write_summary<T: Serialize>(path: &Path, summary: &T) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(summary)?)
}
