//! Contrastive activation steering on a toy autoregressive transformer.
//!
//! The crate is organized around the steering pipeline:
//!
//! - [`numerics`]: dense `f64` tensors, a reverse-mode tape, Adam, and a
//!   deterministic PRNG shared by every random operation in the crate.
//! - [`transformer`]: a decoder-only transformer with per-layer activation
//!   taps, KV-cache decoding, a steering hook, and a teacher-forced trainer.
//! - [`synth_task`]: the synthetic accent/timbre corpus and triplet builder.
//! - [`steering`]: steering-vector extraction (mean activation differences),
//!   norm-preserving application, persistence, and sweep orchestration.
//! - [`eval`]: ISR, accent match rate, speaker similarity, content error
//!   rate, and CSV/JSON reporting.
//! - [`audio`]: the standalone speaker-perturbation DSP pipeline
//!   (formant shift, pitch shift, random EQ) with WAV I/O.

pub mod audio;
pub mod eval;
pub mod numerics;
pub mod steering;
pub mod synth_task;
pub mod transformer;

#[cfg(test)]
pub(crate) mod test_support;
