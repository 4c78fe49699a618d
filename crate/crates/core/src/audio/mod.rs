//! Speaker-perturbation DSP on real audio: formant-frequency scaling, F0
//! scaling, and a random frequency-shaping equalizer, applied sequentially
//! behind a gamma > gate draw. Standalone from the synthetic task; operates
//! on mono WAV files.

mod eq;
mod f0;
mod formant;
mod perturb;
mod stft;
mod vocoder;
mod wav;
mod wave;

pub use eq::{random_eq, Biquad, EqBand};
pub use f0::{estimate_f0, median_f0, F0Frame};
pub use formant::{envelope_peak_hz, formant_shift};
pub use perturb::{perturb, PerturbConfig, PerturbLog};
pub use stft::PvSettings;
pub use vocoder::{pitch_shift, resample, time_stretch};
pub use wav::{read_wav, write_wav};
pub use wave::Waveform;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("unsupported sample rate {0} Hz")]
    UnsupportedSampleRate(u32),
    #[error("non-finite sample in waveform")]
    NonFinite,
    #[error("wav parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported wav codec: format tag {0}")]
    UnsupportedCodec(u16),
    #[error("{what} factor {value} outside [{lo}, {hi}]")]
    FactorOutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("input too short: {len} samples, need at least {need}")]
    InputTooShort { len: usize, need: usize },
    #[error("inverted or empty range")]
    InvertedRange,
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
