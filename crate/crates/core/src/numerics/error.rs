use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("{op}: shape mismatch, lhs {lhs:?} vs rhs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: non-finite output")]
    NonFinite { op: &'static str },
    #[error("{op}: index {index} out of range {bound}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("backward: loss must be scalar, got shape {0:?}")]
    LossNotScalar(Vec<usize>),
    #[error("backward already ran on this tape; reset before calling again")]
    BackwardWithoutReset,
    #[error("adam: step index must be >= 1")]
    AdamStepZero,
    #[error("adam: non-finite gradient")]
    AdamNonFiniteGrad,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
