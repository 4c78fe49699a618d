use super::AudioError;

pub const SUPPORTED_RATES: [u32; 5] = [16000, 22050, 24000, 44100, 48000];

/// Mono waveform, samples nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if !SUPPORTED_RATES.contains(&sample_rate) {
            return Err(AudioError::UnsupportedSampleRate(sample_rate));
        }
        if !samples.iter().all(|s| s.is_finite()) {
            return Err(AudioError::NonFinite);
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Rescales to peak 1.0 when any sample exceeds it, so every operation
    /// leaves the waveform within range.
    pub fn guard_peak(&mut self) {
        let peak = self.peak();
        if peak > 1.0 {
            let inv = 1.0 / peak;
            for s in &mut self.samples {
                *s *= inv;
            }
        }
    }

    /// Signal-to-noise ratio of `other` against `self`, in dB, over the
    /// overlapping prefix. Infinite when identical.
    pub fn snr_db(&self, other: &Waveform) -> f64 {
        let n = self.len().min(other.len());
        let sig: f64 = self.samples[..n].iter().map(|x| x * x).sum();
        let noise: f64 = self.samples[..n]
            .iter()
            .zip(&other.samples[..n])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if noise == 0.0 {
            return f64::INFINITY;
        }
        10.0 * (sig / noise).log10()
    }
}

/// Test-signal helpers used across the audio tests and oracles.
pub mod signals {
    use super::Waveform;
    use std::f64::consts::PI;

    pub fn sine(freq: f64, amp: f64, secs: f64, sample_rate: u32) -> Waveform {
        let n = (secs * sample_rate as f64) as usize;
        let samples = (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / sample_rate as f64).sin())
            .collect();
        Waveform::new(samples, sample_rate).expect("sine")
    }

    /// Band-limited sawtooth built from harmonics up to Nyquist * 0.45.
    pub fn sawtooth(f0: f64, amp: f64, secs: f64, sample_rate: u32) -> Waveform {
        sawtooth_limited(f0, amp, secs, sample_rate, 0.45 * sample_rate as f64)
    }

    /// Sawtooth with harmonics only up to `max_freq`.
    pub fn sawtooth_limited(
        f0: f64,
        amp: f64,
        secs: f64,
        sample_rate: u32,
        max_freq: f64,
    ) -> Waveform {
        let n = (secs * sample_rate as f64) as usize;
        let max_h = (max_freq.min(0.45 * sample_rate as f64) / f0).floor() as usize;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / sample_rate as f64;
                let mut x = 0.0;
                for h in 1..=max_h {
                    x += (2.0 * PI * f0 * h as f64 * t).sin() / h as f64;
                }
                amp * (2.0 / PI) * x
            })
            .collect();
        Waveform::new(samples, sample_rate).expect("sawtooth")
    }

    /// Harmonic source shaped by a Lorentzian spectral envelope centered at
    /// `formant_hz`; a synthetic single-formant vowel.
    pub fn vowel(
        f0: f64,
        formant_hz: f64,
        width_hz: f64,
        amp: f64,
        secs: f64,
        sample_rate: u32,
    ) -> Waveform {
        let n = (secs * sample_rate as f64) as usize;
        let max_h = ((0.45 * sample_rate as f64) / f0).floor() as usize;
        let envelope = |f: f64| 1.0 / (1.0 + ((f - formant_hz) / width_hz).powi(2));
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / sample_rate as f64;
                let mut x = 0.0;
                for h in 1..=max_h {
                    let f = f0 * h as f64;
                    x += envelope(f) * (2.0 * PI * f * t).sin();
                }
                amp * x
            })
            .collect();
        let mut wave = Waveform::new(samples, sample_rate).expect("vowel");
        let peak = wave.peak();
        if peak > 0.0 {
            for s in &mut wave.samples {
                *s *= amp / peak;
            }
        }
        wave
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsupported_rate() {
        assert!(matches!(
            Waveform::new(vec![0.0], 8000),
            Err(AudioError::UnsupportedSampleRate(8000))
        ));
    }

    #[test]
    fn rejects_nan() {
        assert!(matches!(
            Waveform::new(vec![f64::NAN], 24000),
            Err(AudioError::NonFinite)
        ));
    }

    #[test]
    fn guard_peak_rescales_only_above_one() {
        let mut w = Waveform::new(vec![0.5, -0.25], 24000).unwrap();
        w.guard_peak();
        assert_eq!(w.samples, vec![0.5, -0.25]);
        let mut w = Waveform::new(vec![2.0, -1.0], 24000).unwrap();
        w.guard_peak();
        assert_eq!(w.samples, vec![1.0, -0.5]);
    }
}
