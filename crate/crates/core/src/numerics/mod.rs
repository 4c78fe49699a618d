//! Minimal dense tensor math with reverse-mode automatic differentiation.
//!
//! Everything is 64-bit and deterministic: the PRNG is pinned to a published
//! algorithm, reductions run in fixed order, and two runs with the same seed
//! produce bitwise-identical tensors.

mod adam;
mod checkpoint;
mod error;
mod grad_check;
mod rng;
mod tape;
mod tensor;

pub(crate) use tape::{dot, gelu_scalar, matmul_raw, rope_rotate, softmax_row};

pub use adam::{adam_step, AdamParams, AdamState};
pub use checkpoint::{file_digest, hex_string, load_checkpoint, save_checkpoint, Checkpoint};
pub use error::NumericsError;
pub use grad_check::{grad_check, GradCheckReport};
pub use rng::Rng;
pub use tape::{Tape, VarId};
pub use tensor::Tensor;
