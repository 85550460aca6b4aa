//! Central finite-difference machinery for validating analytic gradients.
//!
//! Always run in f64: with eps = 1e-5 the difference quotient carries
//! roughly 1e-10 of noise, far below the 1e-4 acceptance threshold.

/// Relative error with a small floor so near-zero gradient pairs compare
/// on absolute terms.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

/// Worst relative error across two gradient slices.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_error(a, n))
        .fold(0.0, f64::max)
}

/// Central finite-difference gradient of `loss` with respect to a single
/// flat parameter vector. `loss` is re-evaluated with the vector mutated
/// in place; the vector is restored before returning.
pub fn finite_diff_grad(
    values: &mut [f64],
    epsilon: f64,
    mut loss: impl FnMut(&[f64]) -> f64,
) -> Vec<f64> {
    let mut grad = vec![0.0; values.len()];
    for i in 0..values.len() {
        let orig = values[i];
        values[i] = orig + epsilon;
        let up = loss(values);
        values[i] = orig - epsilon;
        let down = loss(values);
        values[i] = orig;
        grad[i] = (up - down) / (2.0 * epsilon);
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_is_exact_to_fd_noise() {
        // f(x) = sum x_i^2, grad = 2x; linear in the perturbation so the
        // central difference is exact up to rounding.
        let mut x = vec![0.3, -1.7, 2.5];
        let analytic: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let numeric = finite_diff_grad(&mut x, 1e-5, |v| v.iter().map(|a| a * a).sum());
        assert!(max_rel_error(&analytic, &numeric) < 1e-9);
        assert_eq!(x, vec![0.3, -1.7, 2.5]);
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let mut x = vec![0.5, 1.5];
        let mut analytic: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        analytic[1] = -analytic[1]; // sign flip
        let numeric = finite_diff_grad(&mut x, 1e-5, |v| v.iter().map(|a| a * a).sum());
        assert!(max_rel_error(&analytic, &numeric) > 0.1);
    }

    #[test]
    fn rel_error_floors_near_zero() {
        assert!(rel_error(0.0, 1e-12) < 1e-4);
        assert!(rel_error(1.0, 1.0) == 0.0);
    }
}
