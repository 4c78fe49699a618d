use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// STFT geometry for the vocoder and formant stages. Hann window,
/// window/hop = 4 by default so overlap-add reconstruction is constant-gain.
#[derive(Debug, Clone)]
pub struct PvSettings {
    pub fft_size: usize,
    pub hop: usize,
}

impl Default for PvSettings {
    fn default() -> Self {
        PvSettings {
            fft_size: 1024,
            hop: 256,
        }
    }
}

pub(crate) fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

pub(crate) struct Stft {
    pub fft_size: usize,
    pub window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(fft_size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Stft {
            fft_size,
            window: hann(fft_size),
            fft: planner.plan_fft_forward(fft_size),
            ifft: planner.plan_fft_inverse(fft_size),
        }
    }

    /// Windowed frames starting at multiples of `hop`; the input is expected
    /// to be pre-padded by the caller.
    pub fn analyze(&self, x: &[f64], hop: usize) -> Vec<Vec<Complex64>> {
        let n = self.fft_size;
        if x.len() < n {
            return Vec::new();
        }
        let n_frames = (x.len() - n) / hop + 1;
        let mut frames = Vec::with_capacity(n_frames);
        for f in 0..n_frames {
            let start = f * hop;
            let mut buf: Vec<Complex64> = x[start..start + n]
                .iter()
                .zip(&self.window)
                .map(|(&s, &w)| Complex64::new(s * w, 0.0))
                .collect();
            self.fft.process(&mut buf);
            frames.push(buf);
        }
        frames
    }

    /// Windowed overlap-add with squared-window normalization.
    pub fn synthesize(&self, frames: &[Vec<Complex64>], hop: usize) -> Vec<f64> {
        let n = self.fft_size;
        if frames.is_empty() {
            return Vec::new();
        }
        let out_len = (frames.len() - 1) * hop + n;
        let mut out = vec![0.0; out_len];
        let mut norm = vec![0.0; out_len];
        let scale = 1.0 / n as f64;
        let mut buf = vec![Complex64::default(); n];
        for (f, frame) in frames.iter().enumerate() {
            buf.copy_from_slice(frame);
            self.ifft.process(&mut buf);
            let start = f * hop;
            for (i, (&w, b)) in self.window.iter().zip(&buf).enumerate() {
                out[start + i] += w * b.re * scale;
                norm[start + i] += w * w;
            }
        }
        for (o, &w2) in out.iter_mut().zip(&norm) {
            if w2 > 1e-9 {
                *o /= w2;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::wave::signals;
    use super::*;

    #[test]
    fn analyze_synthesize_is_near_identity() {
        let wave = signals::sine(440.0, 0.5, 0.25, 24000);
        let settings = PvSettings::default();
        let stft = Stft::new(settings.fft_size);
        let pad = settings.fft_size;
        let mut padded = vec![0.0; pad];
        padded.extend_from_slice(&wave.samples);
        padded.extend(vec![0.0; 2 * pad]);
        let frames = stft.analyze(&padded, settings.hop);
        let resynth = stft.synthesize(&frames, settings.hop);
        let out = &resynth[pad..pad + wave.len()];
        let noise: f64 = wave
            .samples
            .iter()
            .zip(out)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let sig: f64 = wave.samples.iter().map(|a| a * a).sum();
        let snr = 10.0 * (sig / noise.max(1e-300)).log10();
        assert!(snr >= 100.0, "round-trip SNR {snr} dB");
    }
}
