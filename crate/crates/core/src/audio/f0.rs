//! Autocorrelation F0 tracker; the test oracle for the two scaling stages.

use super::{AudioError, Waveform};

#[derive(Debug, Clone, Copy)]
pub struct F0Frame {
    pub time_secs: f64,
    pub f0_hz: f64,
    pub voiced: bool,
}

/// Normalized autocorrelation per 40 ms frame (20 ms hop); a frame is
/// unvoiced when the best peak falls below 0.5 or the frame is silent.
pub fn estimate_f0(wave: &Waveform, min_hz: f64, max_hz: f64) -> Result<Vec<F0Frame>, AudioError> {
    if min_hz >= max_hz || min_hz <= 0.0 {
        return Err(AudioError::InvertedRange);
    }
    let sr = wave.sample_rate as f64;
    let need = (2.0 * sr / min_hz) as usize;
    if wave.len() < need {
        return Err(AudioError::InputTooShort {
            len: wave.len(),
            need,
        });
    }
    let frame_len = (0.040 * sr) as usize;
    let hop = (0.020 * sr) as usize;
    let lag_min = (sr / max_hz).floor().max(1.0) as usize;
    let lag_max = ((sr / min_hz).ceil() as usize).min(frame_len - 1);

    let mut frames = Vec::new();
    let mut start = 0usize;
    while start + frame_len <= wave.len() {
        let x = &wave.samples[start..start + frame_len];
        let mean = x.iter().sum::<f64>() / frame_len as f64;
        let centered: Vec<f64> = x.iter().map(|s| s - mean).collect();
        let energy: f64 = centered.iter().map(|s| s * s).sum();

        let mut corr = vec![0.0f64; lag_max + 1];
        let mut best_r = 0.0f64;
        if energy > 1e-10 {
            for lag in lag_min..=lag_max {
                let n = frame_len - lag;
                let mut num = 0.0;
                let mut e1 = 0.0;
                let mut e2 = 0.0;
                for i in 0..n {
                    num += centered[i] * centered[i + lag];
                    e1 += centered[i] * centered[i];
                    e2 += centered[i + lag] * centered[i + lag];
                }
                let denom = (e1 * e2).sqrt();
                if denom <= 0.0 {
                    continue;
                }
                corr[lag] = num / denom;
                best_r = best_r.max(corr[lag]);
            }
        }
        // A multiple of the true period correlates as well as the period
        // itself, so take the smallest near-maximal local peak.
        let mut best_lag = 0usize;
        if best_r >= 0.5 {
            for lag in lag_min..=lag_max {
                let is_peak = (lag == lag_min || corr[lag] >= corr[lag - 1])
                    && (lag == lag_max || corr[lag] >= corr[lag + 1]);
                if is_peak && corr[lag] >= 0.95 * best_r {
                    best_lag = lag;
                    break;
                }
            }
        }
        let voiced = best_lag > 0;
        let f0 = if voiced { sr / best_lag as f64 } else { 0.0 };
        frames.push(F0Frame {
            time_secs: start as f64 / sr,
            f0_hz: f0,
            voiced,
        });
        start += hop;
    }
    Ok(frames)
}

/// Median F0 over voiced frames.
pub fn median_f0(frames: &[F0Frame]) -> Option<f64> {
    let mut voiced: Vec<f64> = frames.iter().filter(|f| f.voiced).map(|f| f.f0_hz).collect();
    if voiced.is_empty() {
        return None;
    }
    voiced.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(voiced[voiced.len() / 2])
}

#[cfg(test)]
mod tests {
    use super::super::wave::signals;
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn sine_frequency_recovered() {
        let wave = signals::sine(220.0, 0.5, 0.5, 24000);
        let frames = estimate_f0(&wave, 50.0, 500.0).unwrap();
        let f0 = median_f0(&frames).expect("voiced");
        assert!((f0 - 220.0).abs() <= 2.0, "f0 {f0}");
    }

    #[test]
    fn white_noise_is_unvoiced() {
        let mut rng = Rng::new(123, 0);
        let samples: Vec<f64> = (0..24000).map(|_| rng.gauss() * 0.3).collect();
        let wave = Waveform::new(samples, 24000).unwrap();
        let frames = estimate_f0(&wave, 50.0, 500.0).unwrap();
        let unvoiced = frames.iter().filter(|f| !f.voiced).count();
        assert!(
            unvoiced as f64 >= 0.9 * frames.len() as f64,
            "{unvoiced}/{} unvoiced",
            frames.len()
        );
    }

    #[test]
    fn silence_is_unvoiced() {
        let wave = Waveform::new(vec![0.0; 24000], 24000).unwrap();
        let frames = estimate_f0(&wave, 50.0, 500.0).unwrap();
        assert!(frames.iter().all(|f| !f.voiced));
    }

    #[test]
    fn inverted_range_rejected() {
        let wave = signals::sine(220.0, 0.5, 0.5, 24000);
        assert!(matches!(
            estimate_f0(&wave, 500.0, 50.0),
            Err(AudioError::InvertedRange)
        ));
    }

    #[test]
    fn short_input_rejected() {
        let wave = Waveform::new(vec![0.1; 100], 24000).unwrap();
        assert!(matches!(
            estimate_f0(&wave, 50.0, 500.0),
            Err(AudioError::InputTooShort { .. })
        ));
    }
}
