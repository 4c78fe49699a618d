use super::{SteeringError, SteeringVector};
use crate::transformer::DecodeHook;
use serde::{Deserialize, Serialize};
use std::cell::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteerSign {
    /// Neutralize: move away from the accented direction.
    Subtract,
    /// Accentuate: move toward it.
    Add,
}

/// Single-layer steering setup. Exactly one layer is steered per decode.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SteerConfig {
    pub layer: usize,
    pub alpha: f64,
    pub sign: SteerSign,
    /// Norm guard: when the steered vector collapses below
    /// `epsilon * ||activation||`, the activation passes through unchanged.
    pub epsilon: f64,
}

impl SteerConfig {
    pub fn new(layer: usize, alpha: f64, sign: SteerSign) -> Self {
        SteerConfig {
            layer,
            alpha,
            sign,
            epsilon: 1e-8,
        }
    }
}

fn l2(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Norm-preserving steering of one activation vector:
/// `out = (a -+ alpha*v) * ||a|| / ||a -+ alpha*v||`.
/// Returns the steered vector and whether the norm guard fired (in which
/// case the input is returned unchanged).
pub fn apply_steering(
    activation: &[f64],
    vector: &SteeringVector,
    config: &SteerConfig,
) -> Result<(Vec<f64>, bool), SteeringError> {
    if activation.len() != vector.values.len() {
        return Err(SteeringError::DimensionMismatch {
            vector: vector.values.len(),
            model: activation.len(),
        });
    }
    let a_norm = l2(activation);
    if a_norm == 0.0 {
        // Zero activation cannot be rescaled; pass through and record.
        return Ok((activation.to_vec(), true));
    }
    let sign = match config.sign {
        SteerSign::Subtract => -1.0,
        SteerSign::Add => 1.0,
    };
    let steered: Vec<f64> = activation
        .iter()
        .zip(&vector.values)
        .map(|(a, v)| a + sign * config.alpha * v)
        .collect();
    let s_norm = l2(&steered);
    if s_norm < config.epsilon * a_norm {
        return Ok((activation.to_vec(), true));
    }
    let scale = a_norm / s_norm;
    Ok((steered.into_iter().map(|s| s * scale).collect(), false))
}

/// Decode hook that applies one steering vector at its layer and counts
/// norm-guard events across a generation.
pub struct Steerer<'a> {
    vector: &'a SteeringVector,
    config: SteerConfig,
    events: Cell<u64>,
}

impl<'a> Steerer<'a> {
    pub fn new(
        vector: &'a SteeringVector,
        config: SteerConfig,
        d_model: usize,
    ) -> Result<Self, SteeringError> {
        if config.layer != vector.layer {
            return Err(SteeringError::LayerMismatch {
                config: config.layer,
                vector: vector.layer,
            });
        }
        if vector.values.len() != d_model {
            return Err(SteeringError::DimensionMismatch {
                vector: vector.values.len(),
                model: d_model,
            });
        }
        Ok(Steerer {
            vector,
            config,
            events: Cell::new(0),
        })
    }

    pub fn norm_guard_events(&self) -> u64 {
        self.events.get()
    }
}

impl DecodeHook for Steerer<'_> {
    fn layer(&self) -> usize {
        self.config.layer
    }

    fn apply(&self, _position: usize, activation: &[f64]) -> Vec<f64> {
        // Dimensions were checked at construction; this cannot fail.
        let (out, guarded) =
            apply_steering(activation, self.vector, &self.config).expect("dims checked");
        if guarded {
            self.events.set(self.events.get() + 1);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use crate::steering::VectorMeta;

    fn vector(layer: usize, values: Vec<f64>) -> SteeringVector {
        SteeringVector {
            layer,
            values,
            meta: VectorMeta::default(),
        }
    }

    #[test]
    fn alpha_zero_is_bit_exact_identity() {
        let a = vec![0.3, -1.7, 2.5, -0.0];
        let v = vector(0, vec![1.0, 2.0, 3.0, 4.0]);
        let cfg = SteerConfig::new(0, 0.0, SteerSign::Subtract);
        let (out, guarded) = apply_steering(&a, &v, &cfg).unwrap();
        assert!(!guarded);
        for (x, y) in out.iter().zip(&a) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn zero_vector_is_bit_exact_identity() {
        let a = vec![0.3, -1.7, 2.5];
        let v = vector(0, vec![0.0; 3]);
        let cfg = SteerConfig::new(0, 1.0, SteerSign::Subtract);
        let (out, guarded) = apply_steering(&a, &v, &cfg).unwrap();
        assert!(!guarded);
        for (x, y) in out.iter().zip(&a) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn hand_computed_case() {
        // a = (3,4), v = (1,0), alpha = 1, subtract:
        // s = (2,4), ||a|| = 5, ||s|| = sqrt(20), out = s * 5/sqrt(20).
        let a = vec![3.0, 4.0];
        let v = vector(0, vec![1.0, 0.0]);
        let cfg = SteerConfig::new(0, 1.0, SteerSign::Subtract);
        let (out, guarded) = apply_steering(&a, &v, &cfg).unwrap();
        assert!(!guarded);
        assert!((out[0] - 2.2360679774997896).abs() < 1e-12);
        assert!((out[1] - 4.472135954999579).abs() < 1e-12);
        let norm = (out[0] * out[0] + out[1] * out[1]).sqrt();
        assert!((norm - 5.0).abs() / 5.0 < 1e-9);
    }

    #[test]
    fn add_sign_reverses_subtract() {
        let a = vec![3.0, 4.0];
        let v = vector(0, vec![1.0, 0.0]);
        let sub = apply_steering(&a, &v, &SteerConfig::new(0, 1.0, SteerSign::Subtract)).unwrap();
        let add = apply_steering(&a, &v, &SteerConfig::new(0, 1.0, SteerSign::Add)).unwrap();
        assert!(add.0[0] > a[0] && sub.0[0] < a[0]);
    }

    #[test]
    fn norm_is_preserved_on_random_inputs() {
        let mut rng = Rng::new(31, 0);
        for _ in 0..200 {
            let a: Vec<f64> = (0..16).map(|_| rng.gauss() * 3.0).collect();
            let vals: Vec<f64> = (0..16).map(|_| rng.gauss()).collect();
            let v = vector(2, vals);
            let cfg = SteerConfig::new(2, rng.uniform() * 2.0, SteerSign::Subtract);
            let (out, guarded) = apply_steering(&a, &v, &cfg).unwrap();
            if guarded {
                continue;
            }
            let na = l2(&a);
            let no = l2(&out);
            assert!((na - no).abs() / na < 1e-9, "norm {na} vs {no}");
        }
    }

    #[test]
    fn zero_activation_passes_through_with_event() {
        let a = vec![0.0; 4];
        let v = vector(0, vec![1.0; 4]);
        let cfg = SteerConfig::new(0, 1.0, SteerSign::Subtract);
        let (out, guarded) = apply_steering(&a, &v, &cfg).unwrap();
        assert!(guarded);
        assert_eq!(out, a);
    }

    #[test]
    fn norm_guard_on_collapse() {
        // a - v == 0 exactly.
        let a = vec![1.0, 2.0];
        let v = vector(0, vec![1.0, 2.0]);
        let cfg = SteerConfig::new(0, 1.0, SteerSign::Subtract);
        let (out, guarded) = apply_steering(&a, &v, &cfg).unwrap();
        assert!(guarded);
        assert_eq!(out, a);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = vec![1.0; 3];
        let v = vector(0, vec![1.0; 4]);
        let cfg = SteerConfig::new(0, 1.0, SteerSign::Subtract);
        assert!(matches!(
            apply_steering(&a, &v, &cfg),
            Err(SteeringError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn steerer_counts_events() {
        let v = vector(1, vec![1.0, 2.0]);
        let cfg = SteerConfig::new(1, 1.0, SteerSign::Subtract);
        let steerer = Steerer::new(&v, cfg, 2).unwrap();
        let _ = crate::transformer::DecodeHook::apply(&steerer, 0, &[1.0, 2.0]);
        let _ = crate::transformer::DecodeHook::apply(&steerer, 1, &[5.0, 1.0]);
        assert_eq!(steerer.norm_guard_events(), 1);
    }

    #[test]
    fn steerer_layer_mismatch_rejected() {
        let v = vector(1, vec![1.0, 2.0]);
        let cfg = SteerConfig::new(2, 1.0, SteerSign::Subtract);
        assert!(matches!(
            Steerer::new(&v, cfg, 2),
            Err(SteeringError::LayerMismatch { .. })
        ));
    }
}
