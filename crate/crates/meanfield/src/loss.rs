//! Convex losses, datasets, empirical risk and its gradient.
//!
//! The risk gradient is represented by the per-sample weights
//! `g_i = l'(y_i, h(x_i)) / n`; every downstream quantity (particle
//! gradients, the mean potential) is a `g`-weighted sum of feature-map
//! evaluations at the data points.

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Activation, Ensemble};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// l(y, h) = (y - h)^2 / 2
    Square,
    /// l(y, h) = log(1 + exp(-y h)), labels in {-1, +1}
    Logistic,
}

impl Loss {
    pub fn value(self, y: f64, h: f64) -> f64 {
        match self {
            Loss::Square => 0.5 * (y - h) * (y - h),
            Loss::Logistic => softplus(-y * h),
        }
    }

    /// Derivative in the prediction argument.
    pub fn deriv(self, y: f64, h: f64) -> f64 {
        match self {
            Loss::Square => h - y,
            Loss::Logistic => -y * sigmoid(-y * h),
        }
    }
}

/// log(1 + exp(z)) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Finite labeled sample, inputs stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    xs: Vec<f64>,
    ys: Vec<f64>,
    dim: usize,
}

impl Dataset {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dim = xs[0].len();
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        let mut flat = Vec::with_capacity(xs.len() * dim);
        for x in &xs {
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x.len(),
                });
            }
            flat.extend_from_slice(x);
        }
        Ok(Dataset {
            xs: flat,
            ys,
            dim,
        })
    }

    pub fn from_flat(xs: Vec<f64>, ys: Vec<f64>, dim: usize) -> Result<Self> {
        if ys.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if xs.len() != ys.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: ys.len() * dim,
                got: xs.len(),
            });
        }
        Ok(Dataset { xs, ys, dim })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.ys
    }

    pub fn inputs(&self) -> impl Iterator<Item = &[f64]> {
        self.xs.chunks_exact(self.dim)
    }
}

fn check_dims(e: &Ensemble, ds: &Dataset) -> Result<()> {
    if e.dim() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: ds.dim(),
        });
    }
    Ok(())
}

/// Predictions h(x_i) for every sample, in order.
pub fn predictions(e: &Ensemble, ds: &Dataset, act: Activation) -> Result<Vec<f64>> {
    check_dims(e, ds)?;
    Ok((0..ds.len())
        .into_par_iter()
        .map(|i| e.predict_raw(ds.x(i), act))
        .collect())
}

/// Risk-gradient weights `g_i = l'(y_i, h_i) / n` from precomputed predictions.
pub fn risk_gradient_weights(preds: &[f64], ys: &[f64], loss: Loss) -> Vec<f64> {
    let n = ys.len() as f64;
    preds
        .iter()
        .zip(ys)
        .map(|(&h, &y)| loss.deriv(y, h) / n)
        .collect()
}

/// Empirical risk `(1/n) sum_i l(y_i, h(x_i))`, plus the optional ridge
/// term `lambda/(2m) sum_j |w_j|^2`. Every experiment in this crate runs
/// unregularized (`ridge = None`).
pub fn empirical_risk(
    e: &Ensemble,
    ds: &Dataset,
    loss: Loss,
    act: Activation,
    ridge: Option<f64>,
) -> Result<f64> {
    let preds = predictions(e, ds, act)?;
    Ok(risk_of_predictions(&preds, ds.labels(), loss) + ridge_term(e, ridge))
}

/// `(1/n) sum_i l(y_i, h_i)` via pairwise reduction.
pub fn risk_of_predictions(preds: &[f64], ys: &[f64], loss: Loss) -> f64 {
    let mut terms: Vec<f64> = preds
        .iter()
        .zip(ys)
        .map(|(&h, &y)| loss.value(y, h))
        .collect();
    linalg::pairwise_sum(&mut terms) / ys.len() as f64
}

fn ridge_term(e: &Ensemble, ridge: Option<f64>) -> f64 {
    match ridge {
        Some(lambda) => 0.5 * lambda * e.weight_scale(),
        None => 0.0,
    }
}

/// Per-particle objective gradient `m * grad_{w_j} G(W)`, i.e. the
/// particle velocity field of the flow (the factor m undoes the 1/m in
/// the predictor): `sum_i g_i grad psi(w_j)(x_i)`.
pub fn objective_gradient(
    e: &Ensemble,
    ds: &Dataset,
    loss: Loss,
    act: Activation,
) -> Result<Vec<Vec<f64>>> {
    let preds = predictions(e, ds, act)?;
    let g = risk_gradient_weights(&preds, ds.labels(), loss);
    Ok(e.particles()
        .par_iter()
        .map(|p| weighted_psi_grad_sum(&p.w, ds, &g, act))
        .collect())
}

/// `sum_i coeff_i * grad psi(w)(x_i)` over the whole dataset, accumulated
/// in a fixed sample order.
pub(crate) fn weighted_psi_grad_sum(
    w: &[f64],
    ds: &Dataset,
    coeff: &[f64],
    act: Activation,
) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    let a = w[0];
    let b = &w[1..];
    match act {
        Activation::Relu => {
            let mut out0 = 0.0;
            for (i, x) in ds.inputs().enumerate() {
                let c = coeff[i];
                if c == 0.0 {
                    continue;
                }
                let t = linalg::dot(b, x);
                if t > 0.0 {
                    out0 += c * t;
                    linalg::axpy(c * a, x, &mut out[1..]);
                }
            }
            out[0] = out0;
        }
        Activation::SmoothHomogeneous { .. } => {
            let rho = linalg::norm(b);
            if rho == 0.0 {
                return out;
            }
            let mut out0 = 0.0;
            // the b-direction part has a fixed direction; accumulate its
            // scalar coefficient and apply it once
            let mut radial = 0.0;
            for (i, x) in ds.inputs().enumerate() {
                let c = coeff[i];
                if c == 0.0 {
                    continue;
                }
                let t = linalg::dot(b, x) / rho;
                let s = act.unit_value(t);
                let dsig = act.unit_deriv(t);
                out0 += c * rho * s;
                linalg::axpy(c * a * dsig, x, &mut out[1..]);
                radial += c * a * (s - t * dsig) / rho;
            }
            out[0] = out0;
            linalg::axpy(radial, b, &mut out[1..]);
        }
    }
    out
}
