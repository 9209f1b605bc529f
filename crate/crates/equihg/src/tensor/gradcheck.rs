use super::{Tape, Tensor, TensorId};
use crate::error::{Error, Result};

/// Compares reverse-mode gradients of a scalar-valued function against
/// central differences at `point`, returning the worst relative error
/// `|analytic - numeric| / max(1, |analytic|)` over all coordinates.
///
/// `f` must be a pure function of its input; it is re-run from scratch for
/// every perturbation. Fails when any evaluation or gradient is non-finite.
pub fn grad_check<F>(f: F, point: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, TensorId) -> TensorId,
{
    assert!(step > 0.0, "grad_check: step must be positive, got {step}");

    let mut tape = Tape::new();
    let x = tape.leaf(point.clone().with_grad());
    let y = f(&mut tape, x);
    assert_eq!(
        tape.value(y).numel(),
        1,
        "grad_check: function output has shape {:?}, expected a scalar",
        tape.value(y).shape()
    );
    tape.backward(y);
    // An input with no path to the output has gradient zero.
    let analytic = tape
        .grad(x)
        .map(|g| g.to_vec())
        .unwrap_or_else(|| vec![0.0; point.numel()]);

    let eval = |data: Vec<f64>| -> Result<f64> {
        let mut t = Tape::new();
        let x = t.constant(Tensor::new(point.shape().to_vec(), data));
        let y = f(&mut t, x);
        let v = t.data(y)[0];
        if !v.is_finite() {
            return Err(Error::Data(format!(
                "grad_check: non-finite function value {v}"
            )));
        }
        Ok(v)
    };

    let mut worst = 0.0f64;
    for i in 0..point.numel() {
        let mut plus = point.data().to_vec();
        let mut minus = plus.clone();
        plus[i] += step;
        minus[i] -= step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * step);
        let a = analytic[i];
        if !a.is_finite() || !numeric.is_finite() {
            return Err(Error::Data(format!(
                "grad_check: non-finite gradient at coordinate {i} (analytic {a}, numeric {numeric})"
            )));
        }
        let rel = (a - numeric).abs() / a.abs().max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}
