use super::eq::{random_eq, EqBand};
use super::stft::PvSettings;
use super::{formant_shift, pitch_shift, AudioError, Waveform};
use crate::numerics::Rng;
use serde::{Deserialize, Serialize};

/// Parameter ranges for the three-stage speaker perturbation. The gate and
/// factor ranges live here, never hard-coded in the stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbConfig {
    /// Log-uniform bounds for the formant scaling factor.
    pub formant_range: (f64, f64),
    /// Log-uniform bounds for the F0 scaling factor.
    pub f0_range: (f64, f64),
    pub eq_bands: usize,
    pub eq_center_range: (f64, f64),
    pub eq_gain_db_range: (f64, f64),
    pub eq_q_range: (f64, f64),
    /// Perturbations apply only when gamma ~ U(0,1) exceeds this.
    pub gate_threshold: f64,
    pub stft: PvSettingsConfig,
}

/// Serializable mirror of [`PvSettings`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PvSettingsConfig {
    pub fft_size: usize,
    pub hop: usize,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        let quarter_octave = 2f64.powf(0.25);
        PerturbConfig {
            formant_range: (1.0 / quarter_octave, quarter_octave),
            f0_range: (1.0 / quarter_octave, quarter_octave),
            eq_bands: 3,
            eq_center_range: (100.0, 6000.0),
            eq_gain_db_range: (-6.0, 6.0),
            eq_q_range: (0.5, 2.0),
            gate_threshold: 0.3,
            stft: PvSettingsConfig {
                fft_size: 1024,
                hop: 256,
            },
        }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<(), AudioError> {
        let ranges = [self.formant_range, self.f0_range, self.eq_center_range, self.eq_q_range];
        for (lo, hi) in ranges {
            if !(lo > 0.0 && hi >= lo) {
                return Err(AudioError::BadConfig(format!("bad range ({lo}, {hi})")));
            }
        }
        if !(0.0..=1.0).contains(&self.gate_threshold) {
            return Err(AudioError::BadConfig(format!(
                "gate threshold {} outside [0,1]",
                self.gate_threshold
            )));
        }
        Ok(())
    }

    pub fn pv(&self) -> PvSettings {
        PvSettings {
            fft_size: self.stft.fft_size,
            hop: self.stft.hop,
        }
    }
}

/// Drawn parameters for one perturbation, for the JSON Lines log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbLog {
    pub gamma: f64,
    pub applied: bool,
    pub formant_factor: Option<f64>,
    pub f0_factor: Option<f64>,
    pub eq_bands: Vec<EqBand>,
}

/// Gated three-stage perturbation: formant shift, then pitch shift, then
/// random EQ, with independently drawn factors. Below the gate the input
/// passes through bit-exactly.
pub fn perturb(
    wave: &Waveform,
    config: &PerturbConfig,
    rng: &mut Rng,
) -> Result<(Waveform, PerturbLog), AudioError> {
    config.validate()?;
    let gamma = rng.uniform();
    if gamma <= config.gate_threshold {
        return Ok((
            wave.clone(),
            PerturbLog {
                gamma,
                applied: false,
                formant_factor: None,
                f0_factor: None,
                eq_bands: Vec::new(),
            },
        ));
    }
    let pv = config.pv();
    let formant_factor = rng.log_uniform(config.formant_range.0, config.formant_range.1);
    let f0_factor = rng.log_uniform(config.f0_range.0, config.f0_range.1);
    let shifted = formant_shift(wave, formant_factor, &pv)?;
    let pitched = pitch_shift(&shifted, f0_factor, &pv)?;
    let (out, eq_bands) = random_eq(&pitched, config, rng)?;
    Ok((
        out,
        PerturbLog {
            gamma,
            applied: true,
            formant_factor: Some(formant_factor),
            f0_factor: Some(f0_factor),
            eq_bands,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::super::wave::signals;
    use super::*;

    #[test]
    fn gate_passthrough_is_bit_exact() {
        let wave = signals::sine(440.0, 0.5, 0.3, 24000);
        let config = PerturbConfig::default();
        // Find a stream whose first uniform lands at or below the gate.
        let mut rng = (0..1000u64)
            .map(|s| Rng::new(7, s))
            .find(|r| r.clone().uniform() <= 0.3)
            .expect("a gated stream exists");
        let (out, log) = perturb(&wave, &config, &mut rng).unwrap();
        assert!(!log.applied);
        assert_eq!(out.samples, wave.samples);
        assert!(log.formant_factor.is_none());
    }

    #[test]
    fn applied_fraction_is_seventy_percent() {
        // Gate statistics only; use a kill-switch config so no DSP runs.
        let wave = Waveform::new(vec![0.0; 8], 24000).unwrap();
        let mut config = PerturbConfig::default();
        config.stft.fft_size = 4;
        config.stft.hop = 1;
        let root = Rng::new(11, 0);
        let mut applied = 0usize;
        let n = 10_000;
        for i in 0..n {
            let mut rng = root.child(i as u64 + 1);
            let gamma = rng.clone().uniform();
            if gamma > 0.3 {
                applied += 1;
            } else {
                let (out, log) = perturb(&wave, &config, &mut rng).unwrap();
                assert!(!log.applied);
                assert_eq!(out.samples, wave.samples);
            }
        }
        let frac = applied as f64 / n as f64;
        assert!((frac - 0.7).abs() <= 0.02, "applied fraction {frac}");
    }

    #[test]
    fn same_seed_same_output_and_log() {
        let wave = signals::vowel(160.0, 900.0, 250.0, 0.4, 0.4, 24000);
        let config = PerturbConfig::default();
        // A stream that passes the gate.
        let rng0 = (0..1000u64)
            .map(|s| Rng::new(13, s))
            .find(|r| r.clone().uniform() > 0.3)
            .expect("an open stream exists");
        let (a, log_a) = perturb(&wave, &config, &mut rng0.clone()).unwrap();
        let (b, log_b) = perturb(&wave, &config, &mut rng0.clone()).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(log_a.formant_factor, log_b.formant_factor);
        assert_eq!(log_a.f0_factor, log_b.f0_factor);
        assert_eq!(log_a.eq_bands.len(), log_b.eq_bands.len());
    }

    #[test]
    fn duration_invariant_within_one_hop() {
        let wave = signals::vowel(160.0, 900.0, 250.0, 0.4, 0.5, 24000);
        let config = PerturbConfig::default();
        for s in 0..20u64 {
            let mut rng = Rng::new(17, s);
            let (out, log) = perturb(&wave, &config, &mut rng).unwrap();
            if log.applied {
                let diff = (out.len() as i64 - wave.len() as i64).unsigned_abs() as usize;
                assert!(diff <= config.stft.hop, "duration diff {diff}");
            } else {
                assert_eq!(out.len(), wave.len());
            }
        }
    }

    #[test]
    fn invalid_gate_rejected() {
        let wave = signals::sine(440.0, 0.5, 0.2, 24000);
        let config = PerturbConfig {
            gate_threshold: 1.5,
            ..PerturbConfig::default()
        };
        assert!(matches!(
            perturb(&wave, &config, &mut Rng::new(1, 0)),
            Err(AudioError::BadConfig(_))
        ));
    }
}
