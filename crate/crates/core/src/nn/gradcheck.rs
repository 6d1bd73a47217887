//! Central finite-difference utilities for verifying hand-derived
//! backward passes. Always runs in `f64`.

/// Numerical gradient of `f` at `x` via central differences with the
/// given step.
pub fn central_diff_grad(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let original = probe[i];
        probe[i] = original + step;
        let plus = f(&probe);
        probe[i] = original - step;
        let minus = f(&probe);
        probe[i] = original;
        grad.push((plus - minus) / (2.0 * step));
    }
    grad
}

/// Worst relative disagreement between an analytic and a numeric gradient.
///
/// The denominator is floored at 1e-7 so that pairs of true zeros compare
/// as agreeing instead of dividing noise by noise.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-7))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_is_recovered() {
        let f = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        let x = vec![1.0, -2.0, 0.5];
        let g = central_diff_grad(f, &x, 1e-3);
        let expected = [2.0, -4.0, 1.0];
        assert!(max_rel_error(&expected, &g) < 1e-9);
    }

    #[test]
    fn zero_gradients_compare_as_agreeing() {
        assert!(max_rel_error(&[0.0, 0.0], &[1e-13, -1e-13]) < 1e-4);
    }
}
