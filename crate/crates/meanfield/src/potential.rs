//! First-variation potential of the empirical risk and the global
//! optimality certificate built on it.
//!
//! At a predictor h the potential is `J(w) = sum_i g_i psi(w)(x_i)` with
//! `g_i = l'(y_i, h(x_i)) / n`. Its gradient at a particle equals that
//! particle's objective gradient, so the flow moves every particle down
//! its own potential landscape. A measure is a global minimizer exactly
//! when J vanishes on its support and is nonnegative on the whole unit
//! sphere; the certificate checks both, probing the sphere at random and
//! polishing the lowest probes with projected gradient descent.

use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::{predictions, risk_gradient_weights, weighted_psi_grad_sum, Dataset, Loss};
use crate::model::{psi_value_raw, Activation, Ensemble};
use crate::seeding;
use rayon::prelude::*;
use serde::Serialize;

/// Default relative squared-radius threshold below which a particle is
/// treated as carrying no mass when checking the support condition.
pub const DEFAULT_MASS_CUTOFF: f64 = 1e-8;
/// Default slack allowed below zero on probed sphere directions.
pub const DEFAULT_TOL_PROBE: f64 = 1e-3;
/// Default slack allowed around zero on the support.
pub const DEFAULT_TOL_SUPPORT: f64 = 1e-3;

const REFINE_CANDIDATES: usize = 10;
const REFINE_STEP: f64 = 1e-2;
const REFINE_ITERS: usize = 200;

/// Potential J(. | h) frozen at one predictor state.
#[derive(Debug, Clone)]
pub struct MeanPotential<'a> {
    ds: &'a Dataset,
    /// Per-sample coefficients g_i = l'(y_i, h(x_i)) / n.
    g: Vec<f64>,
    act: Activation,
}

/// J(w) at the predictor state of `e`. Building a [`MeanPotential`] via
/// [`MeanPotential::of`] amortizes the predictor pass across many
/// evaluations.
pub fn mean_potential(
    w: &[f64],
    e: &Ensemble,
    ds: &Dataset,
    loss: Loss,
    act: Activation,
) -> Result<f64> {
    MeanPotential::of(e, ds, loss, act)?.value(w)
}

/// grad_w J(w) at the predictor state of `e`.
pub fn mean_potential_grad(
    w: &[f64],
    e: &Ensemble,
    ds: &Dataset,
    loss: Loss,
    act: Activation,
) -> Result<Vec<f64>> {
    MeanPotential::of(e, ds, loss, act)?.grad(w)
}

impl<'a> MeanPotential<'a> {
    /// Builds the potential of `e`'s current predictor on `ds`.
    pub fn of(e: &Ensemble, ds: &'a Dataset, loss: Loss, act: Activation) -> Result<Self> {
        let preds = predictions(e, ds, act)?;
        let g = risk_gradient_weights(&preds, ds.labels(), loss);
        Ok(MeanPotential { ds, g, act })
    }

    /// Potential built directly from per-sample coefficients.
    pub fn from_coefficients(ds: &'a Dataset, g: Vec<f64>, act: Activation) -> Result<Self> {
        if g.len() != ds.len() {
            return Err(Error::DimensionMismatch {
                expected: ds.len(),
                got: g.len(),
            });
        }
        Ok(MeanPotential { ds, g, act })
    }

    pub fn dim(&self) -> usize {
        self.ds.dim() + 1
    }

    /// J(w) = sum_i g_i psi(w)(x_i).
    pub fn value(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        let mut total = 0.0;
        for (i, &gi) in self.g.iter().enumerate() {
            if gi != 0.0 {
                total += gi * psi_value_raw(w, self.ds.x(i), self.act);
            }
        }
        Ok(total)
    }

    /// grad J(w); accumulated in the same order as the objective
    /// gradient so the two agree bitwise.
    pub fn grad(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        Ok(weighted_psi_grad_sum(w, self.ds, &self.g, self.act))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Support condition holds and no probed direction went below -tol.
    CertifiedUpToProbes,
    Violated,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub verdict: Verdict,
    /// max_j |J(eta_j)| over particles carrying mass.
    pub max_abs_support_j: f64,
    /// Minimum of J over probe directions after local refinement.
    pub min_probe_j: f64,
    pub n_probes: usize,
    pub active_particles: usize,
    pub tol_probe: f64,
    pub tol_support: f64,
}

/// [`optimality_certificate`] with the default tolerances.
pub fn optimality_certificate_default(
    e: &Ensemble,
    ds: &Dataset,
    loss: Loss,
    act: Activation,
    n_probes: usize,
    seed: u64,
) -> Result<CertificateReport> {
    optimality_certificate(
        e,
        ds,
        loss,
        act,
        n_probes,
        seed,
        DEFAULT_TOL_PROBE,
        DEFAULT_TOL_SUPPORT,
        DEFAULT_MASS_CUTOFF,
    )
}

/// Checks the stationarity certificate for `e` on `ds`: J must stay
/// within `tol_support` of zero on the mass-carrying support and above
/// `-tol_probe` on the unit sphere, explored through `n_probes` random
/// directions with the lowest-scoring ones refined by projected
/// gradient descent. `mass_cutoff` is the squared-radius fraction of
/// the largest particle below which a particle does not count as
/// support.
#[allow(clippy::too_many_arguments)]
pub fn optimality_certificate(
    e: &Ensemble,
    ds: &Dataset,
    loss: Loss,
    act: Activation,
    n_probes: usize,
    seed: u64,
    tol_probe: f64,
    tol_support: f64,
    mass_cutoff: f64,
) -> Result<CertificateReport> {
    if n_probes == 0 {
        return Err(Error::InvalidParameter("n_probes must be >= 1".into()));
    }
    if !(tol_probe > 0.0) || !(tol_support > 0.0) {
        return Err(Error::InvalidParameter("tolerances must be positive".into()));
    }
    if !(0.0..1.0).contains(&mass_cutoff) {
        return Err(Error::InvalidParameter(
            "mass_cutoff must lie in [0, 1)".into(),
        ));
    }
    let pot = MeanPotential::of(e, ds, loss, act)?;

    let max_sq_radius = e
        .particles()
        .iter()
        .map(|p| linalg::dot(&p.w, &p.w))
        .fold(0.0, f64::max);
    let cutoff = mass_cutoff * max_sq_radius;
    let mut max_abs_support_j = 0.0f64;
    let mut active_particles = 0usize;
    for p in e.particles() {
        let sq = linalg::dot(&p.w, &p.w);
        if sq >= cutoff && sq > 0.0 {
            active_particles += 1;
            let eta = linalg::normalized(&p.w)?;
            max_abs_support_j = max_abs_support_j.max(pot.value(&eta)?.abs());
        }
    }

    let mut rng = seeding::stream(seed, 0);
    let probes: Vec<Vec<f64>> = (0..n_probes)
        .map(|_| seeding::unit_sphere(pot.dim(), &mut rng))
        .collect();
    let mut scored: Vec<(f64, usize)> = probes
        .par_iter()
        .enumerate()
        .map(|(i, eta)| (pot.value(eta).expect("probe dim"), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut min_probe_j = scored.first().map(|s| s.0).unwrap_or(0.0);

    let refined: Vec<f64> = scored
        .iter()
        .take(REFINE_CANDIDATES)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(_, i)| refine_probe(&pot, &probes[*i]))
        .collect();
    for v in refined {
        min_probe_j = min_probe_j.min(v);
    }

    let verdict = if max_abs_support_j <= tol_support && min_probe_j >= -tol_probe {
        Verdict::CertifiedUpToProbes
    } else {
        Verdict::Violated
    };
    Ok(CertificateReport {
        verdict,
        max_abs_support_j,
        min_probe_j,
        n_probes,
        active_particles,
        tol_probe,
        tol_support,
    })
}

/// Projected gradient descent of J on the unit sphere from `start`;
/// returns the lowest value seen along the path.
fn refine_probe(pot: &MeanPotential, start: &[f64]) -> f64 {
    let mut eta = start.to_vec();
    let mut best = pot.value(&eta).expect("probe dim");
    for _ in 0..REFINE_ITERS {
        let grad = pot.grad(&eta).expect("probe dim");
        let radial = linalg::dot(&grad, &eta);
        let mut next = eta.clone();
        for ((nv, gv), ev) in next.iter_mut().zip(&grad).zip(&eta) {
            *nv -= REFINE_STEP * (gv - radial * ev);
        }
        match linalg::normalized(&next) {
            Ok(unit) => eta = unit,
            Err(_) => break,
        }
        let v = pot.value(&eta).expect("probe dim");
        if v < best {
            best = v;
        }
    }
    best
}
