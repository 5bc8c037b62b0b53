//! Central-difference gradient checking.

use super::Tensor;

pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Numerical gradient of a scalar function of several tensors.
pub fn central_difference<F>(mut f: F, inputs: &[Tensor], epsilon: f64) -> Vec<Tensor>
where
    F: FnMut(&[Tensor]) -> f64,
{
    let mut work = inputs.to_vec();
    let mut grads = Vec::with_capacity(inputs.len());
    for t in 0..inputs.len() {
        let mut g = Tensor::zeros(inputs[t].shape());
        for i in 0..inputs[t].len() {
            let orig = work[t].data()[i];
            work[t].data_mut()[i] = orig + epsilon;
            let plus = f(&work);
            work[t].data_mut()[i] = orig - epsilon;
            let minus = f(&work);
            work[t].data_mut()[i] = orig;
            g.data_mut()[i] = (plus - minus) / (2.0 * epsilon);
        }
        grads.push(g);
    }
    grads
}

/// `max |a - n| / max(|a|, |n|, 1e-8)` over every element of every tensor.
pub fn max_relative_error(analytic: &[Tensor], numeric: &[Tensor]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient lists differ in length");
    let mut worst = 0.0f64;
    for (a, n) in analytic.iter().zip(numeric) {
        assert_eq!(a.shape(), n.shape(), "gradient shapes differ");
        for (&x, &y) in a.data().iter().zip(n.data()) {
            let denom = x.abs().max(y.abs()).max(1e-8);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}

/// Compares analytic gradients of `f` at `inputs` against central differences
/// and returns the maximum relative error.
pub fn grad_check<F>(f: F, inputs: &[Tensor], analytic: &[Tensor], epsilon: f64) -> f64
where
    F: FnMut(&[Tensor]) -> f64,
{
    let numeric = central_difference(f, inputs, epsilon);
    max_relative_error(analytic, &numeric)
}
