use super::{NumericsError, Tape, Tensor, VarId};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub n_coords: usize,
    pub pass: bool,
}

/// Compares reverse-mode gradients against central finite differences
/// (f(x+h) - f(x-h)) / 2h, coordinate by coordinate. The relative error
/// denominator is max(|analytic|, |numeric|, 1e-8).
pub fn grad_check<F>(f: F, point: &[Tensor], h: f64, tol: f64) -> Result<GradCheckReport, NumericsError>
where
    F: Fn(&mut Tape, &[VarId]) -> Result<VarId, NumericsError>,
{
    assert!((1e-7..=1e-3).contains(&h), "h must be in [1e-7, 1e-3]");

    let eval = |tensors: &[Tensor]| -> Result<f64, NumericsError> {
        let mut tape = Tape::new();
        let ids: Vec<VarId> = tensors.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &ids)?;
        let v = tape.value(out);
        if !v.is_scalar() {
            return Err(NumericsError::LossNotScalar(v.shape().to_vec()));
        }
        let y = v.scalar_value();
        if !y.is_finite() {
            return Err(NumericsError::NonFinite { op: "grad_check_eval" });
        }
        Ok(y)
    };

    // Analytic gradients.
    let mut tape = Tape::new();
    let ids: Vec<VarId> = point
        .iter()
        .map(|t| tape.leaf(t.clone().with_grad()))
        .collect();
    let out = f(&mut tape, &ids)?;
    tape.backward(out)?;
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| tape.grad(id).expect("leaf grad").to_vec())
        .collect();

    let mut max_rel = 0.0f64;
    let mut n_coords = 0;
    let mut work: Vec<Tensor> = point.to_vec();
    for (ti, tensor) in point.iter().enumerate() {
        for j in 0..tensor.numel() {
            let orig = tensor.data()[j];
            work[ti].data_mut()[j] = orig + h;
            let plus = eval(&work)?;
            work[ti].data_mut()[j] = orig - h;
            let minus = eval(&work)?;
            work[ti].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[ti][j];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max((a - numeric).abs() / denom);
            n_coords += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        n_coords,
        pass: max_rel <= tol,
    })
}
