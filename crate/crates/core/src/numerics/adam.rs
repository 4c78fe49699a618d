use super::NumericsError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment buffers, one pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn zeros_like(params: &[&[f64]]) -> Self {
        AdamState {
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }
}

/// One bias-corrected Adam update over a list of parameter buffers.
/// `t` is the 1-based step index.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    hyper: &AdamParams,
    t: u64,
) -> Result<(), NumericsError> {
    if t == 0 {
        return Err(NumericsError::AdamStepZero);
    }
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    let bc1 = 1.0 - hyper.beta1.powi(t as i32);
    let bc2 = 1.0 - hyper.beta2.powi(t as i32);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        if p.len() != g.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "adam_step",
                lhs: vec![p.len()],
                rhs: vec![g.len()],
            });
        }
        if !g.iter().all(|x| x.is_finite()) {
            return Err(NumericsError::AdamNonFiniteGrad);
        }
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..p.len() {
            m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g[j];
            v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            p[j] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_is_fixed_point() {
        let mut p = vec![1.0, -2.0, 3.0];
        let g = vec![0.0; 3];
        let mut state = AdamState::zeros_like(&[&p]);
        adam_step(&mut [&mut p], &[&g], &mut state, &AdamParams::default(), 1).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = v_hat = 1 at t=1 with g=1, so the update is lr/(1+eps).
        let mut p = vec![0.0];
        let g = vec![1.0];
        let mut state = AdamState::zeros_like(&[&p]);
        let hyper = AdamParams {
            lr: 0.1,
            ..AdamParams::default()
        };
        adam_step(&mut [&mut p], &[&g], &mut state, &hyper, 1).unwrap();
        assert!((p[0] + 0.1).abs() < 1e-8, "p = {}", p[0]);
    }

    #[test]
    fn t_zero_rejected() {
        let mut p = vec![0.0];
        let g = vec![1.0];
        let mut state = AdamState::zeros_like(&[&p]);
        let err = adam_step(&mut [&mut p], &[&g], &mut state, &AdamParams::default(), 0).unwrap_err();
        assert!(matches!(err, NumericsError::AdamStepZero));
    }

    #[test]
    fn non_finite_grad_rejected() {
        let mut p = vec![0.0];
        let g = vec![f64::INFINITY];
        let mut state = AdamState::zeros_like(&[&p]);
        let err = adam_step(&mut [&mut p], &[&g], &mut state, &AdamParams::default(), 1).unwrap_err();
        assert!(matches!(err, NumericsError::AdamNonFiniteGrad));
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let run = || {
            let mut rng = crate::numerics::Rng::new(33, 5);
            let mut p: Vec<f64> = (0..16).map(|_| rng.gauss()).collect();
            let mut state = AdamState::zeros_like(&[&p]);
            for t in 1..=50u64 {
                let g: Vec<f64> = p.iter().map(|x| 2.0 * x + rng.gauss() * 0.01).collect();
                adam_step(&mut [&mut p], &[&g], &mut state, &AdamParams::default(), t).unwrap();
            }
            p
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }
}
