//! Independent numerical oracles for tests.
//!
//! These helpers differentiate and integrate by brute force and are kept
//! free of the analytic code paths they are used to check.

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_diff_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + h;
        let fp = f(&xp);
        xp[i] = orig - h;
        let fm = f(&xp);
        xp[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Central second difference of a scalar function, for convexity spot checks.
pub fn central_second_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

/// Max relative deviation between an analytic gradient and its
/// finite-difference estimate, with the usual `1 + |.|` guard.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (1.0 + a.abs().max(n.abs())))
        .fold(0.0, f64::max)
}
