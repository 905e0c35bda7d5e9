//! Fixed-feature (lazy) counterpart of the particle flow.
//!
//! Freezing the input weights at their initialization and training only
//! the output layer turns the network into a linear model on random
//! features. As the number of features grows the associated kernel
//! converges to its closed form: for directions uniform on the unit
//! sphere and ReLU,
//!
//!   k(x, x') = (|x| |x'| / (2 pi d)) * (sin t + (pi - t) cos t),
//!
//! with t the angle between x and x'. The 1/d factor relative to the
//! Gaussian-weight arc-cosine kernel comes from E|g|^2 = d for a
//! standard Gaussian g in R^d.
//!
//! The module also provides the max-margin programs that describe where
//! gradient descent on the logistic loss converges in direction: the
//! kernel quadratic program min alpha^T K alpha subject to
//! y_i (K alpha)_i >= 1, and its linear special case.

use crate::error::{Error, Result};
use crate::flow::{FlowConfig, Mode};
use crate::linalg;
use crate::loss::Dataset;
use crate::model::Activation;
use crate::seeding;
use rand::RngCore;
use rayon::prelude::*;

/// Update budget for the kernel perceptron separability pass.
pub const PERCEPTRON_UPDATE_CAP: usize = 200_000;

const QP_MAX_ITERS: usize = 200_000;
const QP_TARGET_RESIDUAL: f64 = 1e-12;
const QP_POLISH_EVERY: usize = 100;

/// m random unit directions with the activation applied on top; the
/// feature map is phi(x)_j = act(b_j . x) / sqrt(m).
#[derive(Debug, Clone)]
pub struct RandomFeatures {
    /// Row-major m x dim direction matrix.
    dirs: Vec<f64>,
    m: usize,
    dim: usize,
    act: Activation,
}

impl RandomFeatures {
    pub fn sample(m: usize, dim: usize, act: Activation, rng: &mut dyn RngCore) -> Result<Self> {
        if m == 0 || dim == 0 {
            return Err(Error::InvalidParameter(
                "need at least one feature and one input dimension".into(),
            ));
        }
        let mut dirs = Vec::with_capacity(m * dim);
        for _ in 0..m {
            dirs.extend_from_slice(&seeding::unit_sphere(dim, rng));
        }
        Ok(RandomFeatures { dirs, m, dim, act })
    }

    /// Features frozen at caller-provided directions, normalized onto
    /// the sphere. This is how "train the output layer only" shares its
    /// input weights with a particle run: pass that run's initial
    /// directions.
    pub fn from_directions(directions: &[Vec<f64>], act: Activation) -> Result<Self> {
        let m = directions.len();
        if m == 0 {
            return Err(Error::InvalidParameter("need at least one direction".into()));
        }
        let dim = directions[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter("need a positive dimension".into()));
        }
        let mut dirs = Vec::with_capacity(m * dim);
        for b in directions {
            if b.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: b.len(),
                });
            }
            dirs.extend_from_slice(&linalg::normalized(b)?);
        }
        Ok(RandomFeatures { dirs, m, dim, act })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn directions(&self) -> impl Iterator<Item = &[f64]> {
        self.dirs.chunks_exact(self.dim)
    }

    /// phi(x), scaled so phi(x) . phi(x') is the empirical kernel.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let scale = 1.0 / (self.m as f64).sqrt();
        Ok(self
            .dirs
            .par_chunks_exact(self.dim)
            .map(|b| scale * self.act.unit_value(linalg::dot(b, x)))
            .collect())
    }

    /// Feature matrix with one row per input point.
    pub fn feature_matrix(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.features(x)).collect()
    }

    /// (1/m) sum_j act(b_j . x) act(b_j . x'). Fixed-order pairwise
    /// reduction so the value is reproducible across thread pools.
    pub fn empirical_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.dim || y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: if x.len() != self.dim { x.len() } else { y.len() },
            });
        }
        let total = linalg::pairwise_sum_by(self.m, |j| {
            let b = &self.dirs[j * self.dim..(j + 1) * self.dim];
            self.act.unit_value(linalg::dot(b, x)) * self.act.unit_value(linalg::dot(b, y))
        });
        Ok(total / self.m as f64)
    }

    /// The sub-ensemble made of the first `m` directions; useful for
    /// nested convergence studies where feature sets extend each other.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.m {
            return Err(Error::InvalidParameter(format!(
                "truncation size {m} outside 1..={}",
                self.m
            )));
        }
        Ok(RandomFeatures {
            dirs: self.dirs[..m * self.dim].to_vec(),
            m,
            dim: self.dim,
            act: self.act,
        })
    }
}

/// Infinite-width ReLU kernel for directions uniform on the sphere.
pub fn closed_form_kernel(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::InvalidParameter("empty input".into()));
    }
    let nx = linalg::norm(x);
    let ny = linalg::norm(y);
    if nx == 0.0 || ny == 0.0 {
        return Ok(0.0);
    }
    let d = x.len() as f64;
    let cos = (linalg::dot(x, y) / (nx * ny)).clamp(-1.0, 1.0);
    let theta = cos.acos();
    Ok(nx * ny / (2.0 * std::f64::consts::PI * d) * (theta.sin() + (std::f64::consts::PI - theta) * cos))
}

/// Monte Carlo estimate of E[relu(b.x) relu(b.y)] over uniform unit
/// directions b; the oracle the closed form is validated against.
pub fn monte_carlo_kernel(x: &[f64], y: &[f64], samples: usize, rng: &mut dyn RngCore) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let mut total = 0.0;
    for _ in 0..samples {
        let b = seeding::unit_sphere(x.len(), rng);
        let u = linalg::dot(&b, x).max(0.0);
        let v = linalg::dot(&b, y).max(0.0);
        total += u * v;
    }
    Ok(total / samples as f64)
}

/// Symmetric positive semidefinite Gram matrix.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    k: Vec<f64>,
    n: usize,
}

impl KernelMatrix {
    /// Validates symmetry and positive semidefiniteness (Cholesky of
    /// K + eps I with eps = 1e-10 trace / n).
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rows.iter().map(|r| r.len()).find(|&l| l != n).unwrap_or(n),
            });
        }
        let mut k = Vec::with_capacity(n * n);
        for r in &rows {
            k.extend_from_slice(r);
        }
        let scale = k.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if (k[i * n + j] - k[j * n + i]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidParameter(format!(
                        "kernel matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let km = KernelMatrix { k, n };
        km.validate_psd()?;
        Ok(km)
    }

    /// Builds the Gram matrix of `xs` under `kernel` (evaluated on the
    /// upper triangle and mirrored, so it is symmetric by construction).
    pub fn from_points<F>(xs: &[Vec<f64>], kernel: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> Result<f64> + Sync,
    {
        let n = xs.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut k = vec![0.0; n * n];
        let upper: Vec<(usize, usize, f64)> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (i..n).map(move |j| (i, j)))
            .map(|(i, j)| kernel(&xs[i], &xs[j]).map(|v| (i, j, v)))
            .collect::<Result<Vec<_>>>()?;
        for (i, j, v) in upper {
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        let km = KernelMatrix { k, n };
        km.validate_psd()?;
        Ok(km)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        self.k
            .chunks_exact(self.n)
            .map(|row| linalg::dot(row, v))
            .collect()
    }

    pub fn validate_psd(&self) -> Result<()> {
        let trace: f64 = (0..self.n).map(|i| self.get(i, i)).sum();
        let eps = 1e-10 * trace.max(0.0) / self.n as f64;
        let mut jittered = self.k.clone();
        for i in 0..self.n {
            jittered[i * self.n + i] += eps;
        }
        match linalg::cholesky(&jittered, self.n, f64::MIN_POSITIVE) {
            Some(_) => Ok(()),
            None => Err(Error::NotPsd),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaxMarginSolution {
    /// Expansion coefficients of the predictor f = sum_i alpha_i k(x_i, .).
    pub alpha: Vec<f64>,
    /// alpha^T K alpha; the normalized margin is 1 / sqrt(objective).
    pub objective: f64,
    /// (K alpha)_i for each training point.
    pub decision_values: Vec<f64>,
    /// Sup-norm of the projected-gradient fixed-point residual.
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl MaxMarginSolution {
    pub fn margin(&self) -> f64 {
        1.0 / self.objective.sqrt()
    }
}

fn check_labels(ys: &[f64]) -> Result<()> {
    if ys.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::InvalidParameter("labels must be +1 or -1".into()));
    }
    Ok(())
}

/// Perceptron in the span of the kernel columns; proves strict linear
/// separability in the feature space or rejects after the update cap.
fn kernel_perceptron(k: &KernelMatrix, ys: &[f64]) -> Result<()> {
    let n = k.n();
    let mut f = vec![0.0; n];
    let mut updates = 0usize;
    loop {
        let mut changed = false;
        for i in 0..n {
            if ys[i] * f[i] <= 0.0 {
                for j in 0..n {
                    f[j] += ys[i] * k.get(j, i);
                }
                updates += 1;
                changed = true;
                if updates > PERCEPTRON_UPDATE_CAP {
                    return Err(Error::NotSeparable(format!(
                        "perceptron did not separate within {PERCEPTRON_UPDATE_CAP} updates"
                    )));
                }
            }
        }
        if !changed {
            return Ok(());
        }
    }
}

/// Hard-margin program min alpha^T K alpha s.t. y_i (K alpha)_i >= 1,
/// solved through the equivalent nonnegative form in lambda = y * alpha
/// (projected gradient plus periodic active-set polish). The KKT
/// conditions of that form are exactly primal feasibility and
/// complementary slackness, so `kkt_residual` certifies the solution.
pub fn max_margin_qp(k: &KernelMatrix, ys: &[f64]) -> Result<MaxMarginSolution> {
    let n = k.n();
    if ys.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ys.len(),
        });
    }
    check_labels(ys)?;
    k.validate_psd()?;
    kernel_perceptron(k, ys)?;

    // q_ij = y_i y_j k_ij
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] = ys[i] * ys[j] * k.get(i, j);
        }
    }
    let lipschitz = (0..n)
        .map(|i| q[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let step = 1.0 / lipschitz;

    let grad_of = |lambda: &[f64]| -> Vec<f64> {
        q.chunks_exact(n)
            .map(|row| linalg::dot(row, lambda) - 1.0)
            .collect()
    };
    let residual_of = |lambda: &[f64], grad: &[f64]| -> f64 {
        lambda
            .iter()
            .zip(grad)
            .map(|(&l, &g)| (l - (l - g).max(0.0)).abs())
            .fold(0.0, f64::max)
    };

    let mut lambda = vec![0.0; n];
    let mut iterations = 0usize;
    let mut grad = grad_of(&lambda);
    let mut residual = residual_of(&lambda, &grad);
    while iterations < QP_MAX_ITERS && residual > QP_TARGET_RESIDUAL {
        if iterations % QP_POLISH_EVERY == 0 && iterations > 0 {
            if let Some(polished) = polish_active_set(&q, n, &lambda) {
                let pg = grad_of(&polished);
                let pr = residual_of(&polished, &pg);
                if pr < residual {
                    lambda = polished;
                    grad = pg;
                    residual = pr;
                    if residual <= QP_TARGET_RESIDUAL {
                        break;
                    }
                }
            }
        }
        for (l, g) in lambda.iter_mut().zip(&grad) {
            *l = (*l - step * g).max(0.0);
        }
        iterations += 1;
        grad = grad_of(&lambda);
        residual = residual_of(&lambda, &grad);
        if lambda.iter().sum::<f64>() > 1e10 {
            return Err(Error::NotSeparable(
                "dual iterates diverged; margin constraints are infeasible".into(),
            ));
        }
    }

    let alpha: Vec<f64> = lambda.iter().zip(ys).map(|(&l, &y)| y * l).collect();
    let decision_values: Vec<f64> = grad
        .iter()
        .zip(ys)
        .map(|(&g, &y)| y * (g + 1.0))
        .collect();
    let objective = lambda
        .iter()
        .zip(&grad)
        .map(|(&l, &g)| l * (g + 1.0))
        .sum::<f64>();
    Ok(MaxMarginSolution {
        alpha,
        objective,
        decision_values,
        kkt_residual: residual,
        iterations,
    })
}

/// Solves q restricted to the support of `lambda` as an equality system
/// and re-embeds; returns None when the subsystem is not usable.
fn polish_active_set(q: &[f64], n: usize, lambda: &[f64]) -> Option<Vec<f64>> {
    let active: Vec<usize> = (0..n).filter(|&i| lambda[i] > 0.0).collect();
    let na = active.len();
    if na == 0 {
        return None;
    }
    let mut sub = vec![0.0; na * na];
    let mut trace = 0.0;
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            sub[a * na + b] = q[i * n + j];
        }
        trace += q[i * n + i];
    }
    let jitter = 1e-13 * trace.max(1e-300) / na as f64;
    for a in 0..na {
        sub[a * na + a] += jitter;
    }
    let z = linalg::cholesky_solve(&sub, &vec![1.0; na], na, f64::MIN_POSITIVE)?;
    let mut out = vec![0.0; n];
    for (a, &i) in active.iter().enumerate() {
        out[i] = z[a].max(0.0);
    }
    Some(out)
}

/// Minimum-norm separating hyperplane: min |theta| s.t. y_i theta.x_i >= 1.
/// Solved on the primal side (squared-hinge penalty, Newton steps, and a
/// final equality polish on the active constraints), independently of
/// the kernel quadratic program so the two routes cross-check each other.
pub fn max_margin_linear(xs: &[Vec<f64>], ys: &[f64]) -> Result<Vec<f64>> {
    let n = xs.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if ys.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ys.len(),
        });
    }
    check_labels(ys)?;
    let d = xs[0].len();
    if xs.iter().any(|x| x.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: xs.iter().map(|x| x.len()).find(|&l| l != d).unwrap_or(d),
        });
    }

    let margins = |theta: &[f64]| -> Vec<f64> {
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| y * linalg::dot(theta, x))
            .collect()
    };
    let penalty_value = |theta: &[f64], t: f64| -> f64 {
        let hinge: f64 = margins(theta)
            .iter()
            .map(|&m| {
                let v = (1.0 - m).max(0.0);
                v * v
            })
            .sum();
        0.5 * linalg::dot(theta, theta) + t * hinge
    };

    let mut theta = vec![0.0; d];
    for &t in &[1e2, 1e4, 1e6, 1e8] {
        for _ in 0..100 {
            let ms = margins(&theta);
            let mut grad = theta.clone();
            let mut hess = vec![0.0; d * d];
            for i in 0..d {
                hess[i * d + i] = 1.0;
            }
            for (i, &m) in ms.iter().enumerate() {
                if m < 1.0 {
                    let c = 2.0 * t * (1.0 - m);
                    for (gi, &xi) in grad.iter_mut().zip(&xs[i]) {
                        *gi -= c * ys[i] * xi;
                    }
                    for a in 0..d {
                        for b in 0..d {
                            hess[a * d + b] += 2.0 * t * xs[i][a] * xs[i][b];
                        }
                    }
                }
            }
            let gnorm = linalg::norm(&grad);
            if gnorm <= 1e-9 * (1.0 + linalg::norm(&theta)) {
                break;
            }
            let delta = linalg::cholesky_solve(&hess, &grad, d, f64::MIN_POSITIVE)
                .ok_or_else(|| Error::InvalidParameter("singular Newton system".into()))?;
            // backtracking keeps Newton honest across piecewise-quadratic
            // boundaries
            let f0 = penalty_value(&theta, t);
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand: Vec<f64> = theta
                    .iter()
                    .zip(&delta)
                    .map(|(&th, &de)| th - scale * de)
                    .collect();
                if penalty_value(&cand, t) <= f0 {
                    theta = cand;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                break;
            }
        }
    }

    let final_margins = margins(&theta);
    let violation = final_margins
        .iter()
        .map(|&m| (1.0 - m).max(0.0))
        .fold(0.0, f64::max);
    if violation > 1e-3 {
        return Err(Error::NotSeparable(format!(
            "margin constraints violated by {violation:.3e} at the largest penalty"
        )));
    }

    if let Some(polished) = polish_linear(xs, ys, &final_margins) {
        let ok = xs
            .iter()
            .zip(ys)
            .all(|(x, &y)| y * linalg::dot(&polished, x) >= 1.0 - 1e-9);
        if ok && linalg::norm(&polished) <= linalg::norm(&theta) + 1e-9 {
            theta = polished;
        }
    }
    Ok(theta)
}

/// Equality-constrained solve on the estimated support vectors:
/// theta = B^T (B B^T)^{-1} 1 with B the rows y_i x_i for active i, with
/// negative multipliers dropped one at a time.
fn polish_linear(xs: &[Vec<f64>], ys: &[f64], margins: &[f64]) -> Option<Vec<f64>> {
    let d = xs[0].len();
    let mut active: Vec<usize> = margins
        .iter()
        .enumerate()
        .filter(|(_, &m)| m <= 1.0 + 1e-6)
        .map(|(i, _)| i)
        .collect();
    for _ in 0..margins.len() {
        if active.is_empty() {
            return None;
        }
        let na = active.len();
        let mut gram = vec![0.0; na * na];
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                gram[a * na + b] = ys[i] * ys[j] * linalg::dot(&xs[i], &xs[j]);
            }
        }
        let trace: f64 = (0..na).map(|a| gram[a * na + a]).sum();
        let jitter = 1e-13 * trace.max(1e-300) / na as f64;
        for a in 0..na {
            gram[a * na + a] += jitter;
        }
        let beta = linalg::cholesky_solve(&gram, &vec![1.0; na], na, f64::MIN_POSITIVE)?;
        let (worst, &worst_beta) = beta
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))?;
        if worst_beta < -1e-8 {
            active.remove(worst);
            continue;
        }
        let mut theta = vec![0.0; d];
        for (a, &i) in active.iter().enumerate() {
            linalg::axpy(beta[a] * ys[i], &xs[i], &mut theta);
        }
        return Some(theta);
    }
    None
}

/// Trains only the output weights of a random-feature model on the
/// logistic loss and records the normalized parameter direction along
/// the way. Returns the final weights theta and the recorded
/// theta/|theta| snapshots (every `cfg.record_every` steps plus the
/// final one). On separable data theta diverges in norm while its
/// direction settles on the max-margin classifier, so the snapshots
/// are what carries the signal.
pub fn train_output_layer(
    rf: &RandomFeatures,
    ds: &Dataset,
    cfg: &FlowConfig,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    cfg.validate()?;
    if !matches!(cfg.mode, Mode::FullBatch) {
        return Err(Error::InvalidParameter(
            "output-layer training is full batch".into(),
        ));
    }
    check_labels(ds.labels())?;
    if ds.dim() != rf.dim() {
        return Err(Error::DimensionMismatch {
            expected: rf.dim(),
            got: ds.dim(),
        });
    }
    let feats = rf.feature_matrix(&ds.inputs().map(<[f64]>::to_vec).collect::<Vec<_>>())?;
    logistic_flow(
        &feats,
        ds.labels(),
        cfg.step,
        cfg.iterations,
        cfg.record_every,
        None,
    )
}

/// Gradient descent on the logistic loss of a linear model, with steps
/// normalized to constant length. On separable data the parameter norm
/// then grows linearly while the direction settles, which makes the
/// max-margin limit reachable in a fixed iteration budget. Records the
/// normalized direction every `record_every` steps (0 records only the
/// final direction).
pub fn logistic_flow(
    feats: &[Vec<f64>],
    ys: &[f64],
    step: f64,
    iterations: usize,
    record_every: usize,
    init: Option<&[f64]>,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = feats.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if ys.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ys.len(),
        });
    }
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    let p = feats[0].len();
    if feats.iter().any(|f| f.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: feats.iter().map(|f| f.len()).find(|&l| l != p).unwrap_or(p),
        });
    }
    let mut c = match init {
        Some(c0) => {
            if c0.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: c0.len(),
                });
            }
            c0.to_vec()
        }
        None => vec![0.0; p],
    };
    let inv_n = 1.0 / n as f64;
    let mut grad = vec![0.0; p];
    let mut directions = Vec::new();
    for k in 1..=iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (f, &y) in feats.iter().zip(ys) {
            let u = linalg::dot(&c, f);
            if !u.is_finite() {
                return Err(Error::Diverged { step: k, risk: u });
            }
            // d/du log(1 + exp(-y u)) = -y / (1 + exp(y u))
            let coeff = -y * inv_n / (1.0 + (y * u).exp());
            linalg::axpy(coeff, f, &mut grad);
        }
        let gnorm = linalg::norm(&grad);
        if gnorm < 1e-300 {
            break;
        }
        linalg::axpy(-step / gnorm, &grad, &mut c);
        let at_stride = record_every > 0 && k % record_every == 0;
        if (at_stride || k == iterations) && linalg::norm(&c) > 0.0 {
            directions.push(linalg::normalized(&c)?);
        }
    }
    if directions.is_empty() && linalg::norm(&c) > 0.0 {
        directions.push(linalg::normalized(&c)?);
    }
    Ok((c, directions))
}
