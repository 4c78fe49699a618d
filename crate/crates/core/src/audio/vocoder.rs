//! Phase-vocoder time stretch and resampling-based pitch shift.

use super::stft::{PvSettings, Stft};
use super::{AudioError, Waveform};
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

fn wrap_phase(x: f64) -> f64 {
    // Into (-pi, pi].
    let two_pi = 2.0 * PI;
    let w = x - two_pi * (x / two_pi).round();
    if w <= -PI {
        w + two_pi
    } else {
        w
    }
}

/// Time-stretches by `ratio` (output duration = input * ratio) with plain
/// per-bin phase propagation; pitch is preserved. Output length is
/// round(len * hs/ha) for the effective integer hop pair.
pub fn time_stretch(wave: &Waveform, ratio: f64, pv: &PvSettings) -> Result<Waveform, AudioError> {
    if wave.len() < pv.fft_size {
        return Err(AudioError::InputTooShort {
            len: wave.len(),
            need: pv.fft_size,
        });
    }
    let hs = pv.hop;
    let ha = ((hs as f64 / ratio).round() as usize).max(1);
    let eff_ratio = hs as f64 / ha as f64;

    let n = pv.fft_size;
    let stft = Stft::new(n);
    // No leading pad: synthesis phases initialize from the first frame, and
    // that frame must hold real signal so the output stays phase-aligned
    // with the input (a zero frame would seed arbitrary phases).
    let mut padded = wave.samples.clone();
    padded.extend(vec![0.0; 2 * n]);
    let frames = stft.analyze(&padded, ha);

    let half = n / 2 + 1;
    let mut prev_phase = vec![0.0; half];
    let mut acc_phase = vec![0.0; half];
    let mut synth: Vec<Vec<Complex64>> = Vec::with_capacity(frames.len());
    for (idx, frame) in frames.iter().enumerate() {
        let mut out = vec![Complex64::default(); n];
        for k in 0..half {
            let mag = frame[k].norm();
            let phase = frame[k].arg();
            if idx == 0 {
                acc_phase[k] = phase;
            } else {
                let omega = 2.0 * PI * k as f64 / n as f64;
                let expected = omega * ha as f64;
                let deviation = wrap_phase(phase - prev_phase[k] - expected);
                let instantaneous = omega + deviation / ha as f64;
                acc_phase[k] += instantaneous * hs as f64;
            }
            prev_phase[k] = phase;
            let c = Complex64::from_polar(mag, acc_phase[k]);
            out[k] = c;
            if k > 0 && k < n - k {
                out[n - k] = c.conj();
            }
        }
        synth.push(out);
    }
    let resynth = stft.synthesize(&synth, hs);

    let out_len = ((wave.len() as f64) * eff_ratio).round() as usize;
    let mut samples = vec![0.0; out_len];
    for (i, s) in samples.iter_mut().enumerate() {
        if i < resynth.len() {
            *s = resynth[i];
        }
    }
    let mut out = Waveform {
        samples,
        sample_rate: wave.sample_rate,
    };
    out.guard_peak();
    Ok(out)
}

/// Reads the signal at positions n*step with Hann-windowed sinc
/// interpolation: all frequencies scale by `step`, the length by 1/step.
/// For step > 1 the kernel cutoff drops to 1/step, anti-aliasing content
/// that would cross Nyquist.
pub fn resample(wave: &Waveform, step: f64) -> Waveform {
    if wave.is_empty() {
        return wave.clone();
    }
    if step == 1.0 {
        return wave.clone();
    }
    const HALF_TAPS: usize = 16;
    let cutoff = if step > 1.0 { 1.0 / step } else { 1.0 };
    let half_width = (HALF_TAPS as f64 / cutoff).ceil() as isize;
    let x = &wave.samples;
    let n = x.len() as isize;
    let out_len = (((wave.len() - 1) as f64 / step).floor() as usize) + 1;
    let samples = (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let center = pos.floor() as isize;
            let mut acc = 0.0;
            for m in center - half_width + 1..=center + half_width {
                if m < 0 || m >= n {
                    continue;
                }
                let d = pos - m as f64;
                let sinc = if d == 0.0 {
                    1.0
                } else {
                    let a = PI * cutoff * d;
                    a.sin() / a
                };
                let w = 0.5 + 0.5 * (PI * d / half_width as f64).cos();
                acc += x[m as usize] * cutoff * sinc * w;
            }
            acc
        })
        .collect();
    Waveform {
        samples,
        sample_rate: wave.sample_rate,
    }
}

/// Scales the fundamental (and the whole spectrum) by `k` while keeping the
/// duration: phase-vocoder stretch by k, then resample by k.
pub fn pitch_shift(wave: &Waveform, k: f64, pv: &PvSettings) -> Result<Waveform, AudioError> {
    if !(0.5..=2.0).contains(&k) {
        return Err(AudioError::FactorOutOfRange {
            what: "pitch",
            value: k,
            lo: 0.5,
            hi: 2.0,
        });
    }
    if wave.len() < pv.fft_size {
        return Err(AudioError::InputTooShort {
            len: wave.len(),
            need: pv.fft_size,
        });
    }
    let stretched = time_stretch(wave, k, pv)?;
    let mut out = resample(&stretched, k);
    out.guard_peak();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::f0::{estimate_f0, median_f0};
    use super::super::wave::signals;
    use super::*;

    #[test]
    fn stretch_changes_length_by_ratio() {
        let wave = signals::sine(300.0, 0.5, 0.5, 24000);
        let pv = PvSettings::default();
        let out = time_stretch(&wave, 1.5, &pv).unwrap();
        let expect = wave.len() as f64 * (256.0 / ((256.0f64 / 1.5).round()));
        assert!((out.len() as f64 - expect).abs() <= 1.0);
    }

    #[test]
    fn identity_factor_reconstructs_at_forty_db() {
        let wave = signals::sine(440.0, 0.5, 0.3, 24000);
        let out = pitch_shift(&wave, 1.0, &PvSettings::default()).unwrap();
        assert_eq!(out.len(), wave.len());
        let margin = 2048;
        let a = &wave.samples[margin..wave.len() - margin];
        let b = &out.samples[margin..wave.len() - margin];
        let sig: f64 = a.iter().map(|x| x * x).sum();
        let noise: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let snr = 10.0 * (sig / noise.max(1e-300)).log10();
        assert!(snr >= 40.0, "identity pitch shift SNR {snr} dB");
    }

    #[test]
    fn stretch_at_unit_ratio_reconstructs() {
        let wave = signals::sine(440.0, 0.5, 0.3, 24000);
        let out = time_stretch(&wave, 1.0, &PvSettings::default()).unwrap();
        assert_eq!(out.len(), wave.len());
        // Interior SNR (edges carry window ramp error).
        let margin = 2048;
        let a = &wave.samples[margin..wave.len() - margin];
        let b = &out.samples[margin..wave.len() - margin];
        let sig: f64 = a.iter().map(|x| x * x).sum();
        let noise: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let snr = 10.0 * (sig / noise.max(1e-300)).log10();
        assert!(snr >= 40.0, "identity stretch SNR {snr} dB");
    }

    #[test]
    fn sawtooth_pitch_scales_by_factor() {
        let wave = signals::sawtooth(200.0, 0.4, 0.6, 24000);
        let out = pitch_shift(&wave, 1.25, &PvSettings::default()).unwrap();
        let frames = estimate_f0(&out, 50.0, 500.0).unwrap();
        let f0 = median_f0(&frames).expect("voiced");
        assert!(
            (f0 - 250.0).abs() / 250.0 <= 0.03,
            "estimated f0 {f0}, expected 250"
        );
    }

    #[test]
    fn duration_preserved_within_one_hop() {
        let wave = signals::sine(220.0, 0.5, 0.7, 24000);
        for &k in &[0.8, 0.9, 1.1, 1.3] {
            let out = pitch_shift(&wave, k, &PvSettings::default()).unwrap();
            let diff = (out.len() as i64 - wave.len() as i64).unsigned_abs() as usize;
            assert!(diff <= 256, "k={k}: length diff {diff}");
        }
    }

    #[test]
    fn inverse_shift_restores_at_twenty_db() {
        let wave = signals::sawtooth_limited(180.0, 0.4, 0.6, 24000, 5000.0);
        let pv = PvSettings::default();
        let up = pitch_shift(&wave, 1.2, &pv).unwrap();
        let back = pitch_shift(&up, 1.0 / 1.2, &pv).unwrap();
        // Compare interiors; pitch-shift round trips blur the edges.
        let n = wave.len().min(back.len());
        let margin = 4096;
        let a = &wave.samples[margin..n - margin];
        let b = &back.samples[margin..n - margin];
        let sig: f64 = a.iter().map(|x| x * x).sum();
        let noise: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let snr = 10.0 * (sig / noise.max(1e-300)).log10();
        assert!(snr >= 20.0, "inverse round-trip SNR {snr} dB");
    }

    #[test]
    fn out_of_range_factor_rejected() {
        let wave = signals::sine(440.0, 0.5, 0.2, 24000);
        assert!(matches!(
            pitch_shift(&wave, 2.5, &PvSettings::default()),
            Err(AudioError::FactorOutOfRange { .. })
        ));
    }

    #[test]
    fn short_input_rejected() {
        let wave = Waveform::new(vec![0.1; 100], 24000).unwrap();
        assert!(matches!(
            pitch_shift(&wave, 1.2, &PvSettings::default()),
            Err(AudioError::InputTooShort { .. })
        ));
    }
}
