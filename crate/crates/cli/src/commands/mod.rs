pub mod augment_audio;
pub mod evaluate;
pub mod extract;
pub mod gen_corpus;
pub mod report;
pub mod steer_cmd;
pub mod sweep;
pub mod train;

use crate::artifacts::{Layout, TaskManifest};
use crate::config::RunConfig;
use anyhow::{Context, Result};
use steer_core::numerics::load_checkpoint;
use steer_core::numerics::{AdamState, Rng};
use steer_core::transformer::{train_state_from_checkpoint, Model};

/// Per-command stream bases; every command derives all randomness from
/// (seed, base + offsets), so one integer reproduces an entire run.
pub mod streams {
    pub const CORPUS: u64 = 0x0100_0000_0000_0000;
    pub const EXTRACT: u64 = 0x0300_0000_0000_0000;
    pub const STEER: u64 = 0x0400_0000_0000_0000;
    pub const SWEEP: u64 = 0x0500_0000_0000_0000;
    pub const EVALUATE: u64 = 0x0600_0000_0000_0000;
    pub const AUDIO: u64 = 0x0700_0000_0000_0000;
    pub const GATE: u64 = 0x0800_0000_0000_0000;
}

pub fn command_rng(run: &RunConfig, base: u64) -> Rng {
    Rng::new(run.seed, base)
}

pub fn load_world(run: &RunConfig) -> Result<(Layout, TaskManifest)> {
    let layout = Layout::new(&run.out_dir);
    let manifest = TaskManifest::load(&layout.task())?;
    Ok((layout, manifest))
}

pub fn load_model(layout: &Layout) -> Result<(Model, AdamState, u64)> {
    let ckpt = load_checkpoint(&layout.checkpoint())
        .with_context(|| format!("loading checkpoint {}; run train first", layout.checkpoint().display()))?;
    Ok(train_state_from_checkpoint(&ckpt)?)
}
