//! Peaking-EQ biquad sections with cookbook coefficients, cascaded into a
//! random frequency-shaping equalizer.

use super::{AudioError, PerturbConfig, Waveform};
use crate::numerics::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EqBand {
    pub center_hz: f64,
    pub gain_db: f64,
    pub q: f64,
}

/// Second-order peaking section, direct form II transposed.
#[derive(Debug, Clone)]
pub struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    s1: f64,
    s2: f64,
}

impl Biquad {
    /// Cookbook peaking EQ. The center frequency is clamped to
    /// 0.45 * sample_rate.
    pub fn peaking(band: &EqBand, sample_rate: u32) -> Self {
        let fc = band.center_hz.min(0.45 * sample_rate as f64);
        let a = 10f64.powf(band.gain_db / 40.0);
        let w0 = 2.0 * PI * fc / sample_rate as f64;
        let alpha = w0.sin() / (2.0 * band.q);
        let b0 = 1.0 + alpha * a;
        let b1 = -2.0 * w0.cos();
        let b2 = 1.0 - alpha * a;
        let a0 = 1.0 + alpha / a;
        let a1 = b1;
        let a2 = 1.0 - alpha / a;
        Biquad {
            b0: b0 / a0,
            b1: b1 / a0,
            b2: b2 / a0,
            a1: a1 / a0,
            a2: a2 / a0,
            s1: 0.0,
            s2: 0.0,
        }
    }

    pub fn tick(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.s1;
        self.s1 = self.b1 * x - self.a1 * y + self.s2;
        self.s2 = self.b2 * x - self.a2 * y;
        y
    }

    pub fn process(&mut self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&s| self.tick(s)).collect()
    }
}

pub fn apply_bands(wave: &Waveform, bands: &[EqBand]) -> Waveform {
    let mut samples = wave.samples.clone();
    for band in bands {
        let mut biquad = Biquad::peaking(band, wave.sample_rate);
        samples = biquad.process(&samples);
    }
    let mut out = Waveform {
        samples,
        sample_rate: wave.sample_rate,
    };
    out.guard_peak();
    out
}

/// Draws band parameters from the config ranges and applies the cascade.
pub fn random_eq(
    wave: &Waveform,
    config: &PerturbConfig,
    rng: &mut Rng,
) -> Result<(Waveform, Vec<EqBand>), AudioError> {
    if wave.is_empty() {
        return Err(AudioError::InputTooShort { len: 0, need: 1 });
    }
    let bands: Vec<EqBand> = (0..config.eq_bands)
        .map(|_| EqBand {
            center_hz: rng.log_uniform(config.eq_center_range.0, config.eq_center_range.1),
            gain_db: rng.uniform_in(config.eq_gain_db_range.0, config.eq_gain_db_range.1),
            q: rng.uniform_in(config.eq_q_range.0, config.eq_q_range.1),
        })
        .collect();
    Ok((apply_bands(wave, &bands), bands))
}

#[cfg(test)]
mod tests {
    use super::super::wave::signals;
    use super::*;

    #[test]
    fn zero_gain_is_identity() {
        let wave = signals::sine(440.0, 0.5, 0.3, 24000);
        let bands = [
            EqBand { center_hz: 300.0, gain_db: 0.0, q: 1.0 },
            EqBand { center_hz: 2000.0, gain_db: 0.0, q: 0.7 },
            EqBand { center_hz: 5000.0, gain_db: 0.0, q: 2.0 },
        ];
        let out = apply_bands(&wave, &bands);
        let max_err = wave
            .samples
            .iter()
            .zip(&out.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 1e-12, "max err {max_err}");
    }

    #[test]
    fn filter_is_linear() {
        let wave = signals::sine(800.0, 0.5, 0.2, 24000);
        let scaled = Waveform::new(wave.samples.iter().map(|s| 0.3 * s).collect(), 24000).unwrap();
        let bands = [EqBand { center_hz: 1000.0, gain_db: 5.0, q: 1.0 }];
        let filtered_then_scaled: Vec<f64> = apply_bands(&wave, &bands)
            .samples
            .iter()
            .map(|s| 0.3 * s)
            .collect();
        let scaled_then_filtered = apply_bands(&scaled, &bands).samples;
        for (a, b) in filtered_then_scaled.iter().zip(&scaled_then_filtered) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn six_db_boost_at_center() {
        // Sine probe at the center frequency: steady-state amplitude ratio
        // approaches 10^(6/20).
        let wave = signals::sine(1000.0, 0.25, 0.5, 24000);
        let bands = [EqBand { center_hz: 1000.0, gain_db: 6.0, q: 1.0 }];
        let out = apply_bands(&wave, &bands);
        let mid = wave.len() / 2;
        let span = 4800;
        let peak_in = wave.samples[mid..mid + span]
            .iter()
            .fold(0.0f64, |m, s| m.max(s.abs()));
        let peak_out = out.samples[mid..mid + span]
            .iter()
            .fold(0.0f64, |m, s| m.max(s.abs()));
        let ratio = peak_out / peak_in;
        let expect = 10f64.powf(6.0 / 20.0);
        assert!(
            (ratio - expect).abs() / expect <= 0.02,
            "gain ratio {ratio}, expected {expect}"
        );
    }

    #[test]
    fn center_frequency_clamped_below_nyquist() {
        let band = EqBand { center_hz: 20000.0, gain_db: 6.0, q: 1.0 };
        let wave = signals::sine(440.0, 0.25, 0.1, 16000);
        // Must not blow up; the clamp keeps the section stable.
        let out = apply_bands(&wave, &[band]);
        assert!(out.samples.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn random_eq_is_deterministic() {
        let wave = signals::sine(500.0, 0.25, 0.2, 24000);
        let config = PerturbConfig::default();
        let (a, bands_a) = random_eq(&wave, &config, &mut Rng::new(5, 1)).unwrap();
        let (b, bands_b) = random_eq(&wave, &config, &mut Rng::new(5, 1)).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(bands_a.len(), bands_b.len());
        for (x, y) in bands_a.iter().zip(&bands_b) {
            assert_eq!(x.center_hz, y.center_hz);
        }
    }
}
