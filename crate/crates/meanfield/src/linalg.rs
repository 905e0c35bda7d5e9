//! Small dense vector/matrix helpers used across the crate.
//!
//! Everything operates on `&[f64]` slices. Reductions use a fixed
//! summation order so results are reproducible across runs and worker
//! counts.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += c * x
pub fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

pub fn scale(c: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= c;
    }
}

/// Returns `x / ||x||`, or `ZeroVector` if the norm vanishes.
pub fn normalized(x: &[f64]) -> crate::error::Result<Vec<f64>> {
    let n = norm(x);
    if n == 0.0 || !n.is_finite() {
        return Err(crate::error::Error::ZeroVector);
    }
    Ok(x.iter().map(|v| v / n).collect())
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (norm(a) * norm(b))
}

/// Angle between two vectors in radians, clamped against rounding.
pub fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    cosine_similarity(a, b).clamp(-1.0, 1.0).acos()
}

/// In-place pairwise tree reduction. Deterministic: the tree shape depends
/// only on the length, never on the thread count.
pub fn pairwise_sum(buf: &mut [f64]) -> f64 {
    let mut len = buf.len();
    while len > 1 {
        let half = len / 2;
        for i in 0..half {
            buf[i] += buf[len - 1 - i];
        }
        len -= half;
    }
    if len == 1 {
        buf[0]
    } else {
        0.0
    }
}

/// Pairwise tree sum of `f(i)` for `i in 0..n` without materializing all terms.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
    fn go<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= 32 {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            go(lo, mid, f) + go(mid, hi, f)
        }
    }
    go(0, n, &f)
}

/// Solves `A x = b` for symmetric positive definite `A` (row-major, n x n)
/// via Cholesky. Returns `None` if a pivot drops below `tol`.
pub fn cholesky_solve(a: &[f64], b: &[f64], n: usize, tol: f64) -> Option<Vec<f64>> {
    let l = cholesky(a, n, tol)?;
    // forward substitution L y = b
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    // back substitution L^T x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Lower Cholesky factor of a symmetric matrix, or `None` if a pivot is < `tol`.
pub fn cholesky(a: &[f64], n: usize, tol: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s < tol {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}
