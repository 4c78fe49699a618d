//! Formant shifting by spectral-envelope warping.
//!
//! Per STFT frame: estimate the log-magnitude envelope by cepstral
//! liftering (low quefrencies only, below the pitch peak), warp its
//! frequency axis by beta, and multiply each bin by the envelope ratio.
//! Harmonic locations and phases are untouched, so F0 is preserved exactly
//! and the duration does not change.

use super::stft::{PvSettings, Stft};
use super::{AudioError, Waveform};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Quefrency cutoff for the envelope estimate: detail coarser than
/// sample_rate / LIFTER_CUTOFF Hz, safely below typical pitch quefrencies.
const LIFTER_CUTOFF: usize = 80;
const GAIN_CLAMP_DB: f64 = 40.0;

fn cepstral_smooth(log_mags: &[f64], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = log_mags.len();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = log_mags.iter().map(|&m| Complex64::new(m, 0.0)).collect();
    // Real cepstrum.
    ifft.process(&mut buf);
    let scale = 1.0 / n as f64;
    for c in buf.iter_mut() {
        *c *= scale;
    }
    // Lifter: keep low quefrencies on both ends (the cepstrum is symmetric).
    let cutoff = LIFTER_CUTOFF.min(n / 2);
    for (q, c) in buf.iter_mut().enumerate() {
        let dist = q.min(n - q);
        if dist > cutoff {
            *c = Complex64::default();
        }
    }
    fft.process(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Log-magnitude envelope that hugs the harmonic peaks: plain cepstral
/// smoothing of a comb spectrum sinks toward the inter-harmonic valleys, so
/// the smoothed curve is iteratively re-fit to the pointwise maximum of
/// itself and the spectrum (the "true envelope" update).
fn log_envelope(mags: &[f64], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let peak = mags.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    let floor = (peak * 1e-5).max(1e-12);
    let mut e: Vec<f64> = mags.iter().map(|&m| m.max(floor).ln()).collect();
    let mut v = cepstral_smooth(&e, planner);
    for _ in 0..5 {
        for (ei, &vi) in e.iter_mut().zip(&v) {
            *ei = ei.max(vi);
        }
        v = cepstral_smooth(&e, planner);
    }
    v
}

/// Scales the spectral envelope by `beta` while preserving pitch and
/// duration.
pub fn formant_shift(wave: &Waveform, beta: f64, pv: &PvSettings) -> Result<Waveform, AudioError> {
    if !(0.7..=1.4).contains(&beta) {
        return Err(AudioError::FactorOutOfRange {
            what: "formant",
            value: beta,
            lo: 0.7,
            hi: 1.4,
        });
    }
    if wave.len() < pv.fft_size {
        return Err(AudioError::InputTooShort {
            len: wave.len(),
            need: pv.fft_size,
        });
    }
    let n = pv.fft_size;
    let half = n / 2;
    let stft = Stft::new(n);
    let mut planner = FftPlanner::new();
    let max_gain = 10f64.powf(GAIN_CLAMP_DB / 20.0);

    let mut padded = vec![0.0; n];
    padded.extend_from_slice(&wave.samples);
    padded.extend(vec![0.0; 2 * n]);
    let mut frames = stft.analyze(&padded, pv.hop);

    for frame in &mut frames {
        let mags: Vec<f64> = frame.iter().map(|c| c.norm()).collect();
        let env = log_envelope(&mags, &mut planner);
        for k in 0..=half {
            // Warped envelope: the value at bin k comes from bin k/beta.
            let src = k as f64 / beta;
            let lo = src.floor() as usize;
            let warped = if lo >= half {
                env[half]
            } else {
                let frac = src - lo as f64;
                env[lo] * (1.0 - frac) + env[lo + 1] * frac
            };
            let gain = (warped - env[k]).exp().clamp(1.0 / max_gain, max_gain);
            frame[k] *= gain;
            if k > 0 && k < n - k {
                frame[n - k] = frame[k].conj();
            }
        }
    }
    let resynth = stft.synthesize(&frames, pv.hop);
    let mut samples = vec![0.0; wave.len()];
    for (i, s) in samples.iter_mut().enumerate() {
        if n + i < resynth.len() {
            *s = resynth[n + i];
        }
    }
    let mut out = Waveform {
        samples,
        sample_rate: wave.sample_rate,
    };
    out.guard_peak();
    Ok(out)
}

/// Envelope-peak oracle for tests: measures per-harmonic amplitudes from the
/// averaged magnitude spectrum and fits a log-parabola through the strongest
/// harmonic and its neighbors. Independent of the cepstral path above.
pub fn envelope_peak_hz(wave: &Waveform, f0_hz: f64, pv: &PvSettings) -> f64 {
    let n = pv.fft_size;
    let stft = Stft::new(n);
    let frames = stft.analyze(&wave.samples, pv.hop);
    let half = n / 2;
    let mut avg = vec![0.0; half + 1];
    for frame in &frames {
        for (a, c) in avg.iter_mut().zip(frame.iter().take(half + 1)) {
            *a += c.norm();
        }
    }
    let bin_hz = wave.sample_rate as f64 / n as f64;
    let harmonic_amp = |h: usize| -> f64 {
        let f = f0_hz * h as f64;
        let center = (f / bin_hz).round() as isize;
        let lo = (center - 2).max(0) as usize;
        let hi = ((center + 2) as usize).min(half);
        avg[lo..=hi].iter().cloned().fold(0.0, f64::max)
    };
    let max_h = ((0.45 * wave.sample_rate as f64) / f0_hz) as usize;
    let amps: Vec<f64> = (1..=max_h).map(harmonic_amp).collect();
    let mut best = 0usize;
    for (i, &a) in amps.iter().enumerate() {
        if a > amps[best] {
            best = i;
        }
    }
    if best == 0 || best + 1 >= amps.len() {
        return f0_hz * (best + 1) as f64;
    }
    let (a, b, c) = (
        amps[best - 1].max(1e-12).ln(),
        amps[best].max(1e-12).ln(),
        amps[best + 1].max(1e-12).ln(),
    );
    let denom = a - 2.0 * b + c;
    let offset = if denom.abs() < 1e-12 {
        0.0
    } else {
        0.5 * (a - c) / denom
    };
    f0_hz * ((best + 1) as f64 + offset)
}
