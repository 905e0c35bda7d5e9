//! Polar reparameterization of the particle flow.
//!
//! A particle w = r * eta with r >= 0 and eta on the unit sphere carries
//! mass r^2 (the predictor is 2-homogeneous in w). Under the flow the
//! coordinates evolve as
//!
//!   dr/dt   = -2 r J(eta),
//!   deta/dt = -(I - eta eta^T) grad J(eta),
//!
//! where J is the potential of the current measure. `polar_step` is the
//! explicit Euler discretization, with directions renormalized after
//! each step; mass moves at a rate proportional to the mass already
//! present while directions move at a mass-independent speed.

use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::{Dataset, Loss};
use crate::model::{Activation, Ensemble, Particle};
use crate::potential::MeanPotential;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct PolarParticle {
    /// Nonnegative radius; the particle carries mass radius^2.
    pub radius: f64,
    /// Unit vector in R^{d+1}.
    pub direction: Vec<f64>,
}

impl PolarParticle {
    pub fn new(radius: f64, direction: Vec<f64>) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(
                "radius must be finite and nonnegative".into(),
            ));
        }
        let norm = linalg::norm(&direction);
        if !((norm - 1.0).abs() <= 1e-9) {
            return Err(Error::InvalidParameter(format!(
                "direction must be unit norm, got {norm}"
            )));
        }
        Ok(PolarParticle { radius, direction })
    }

    fn weights(&self) -> Vec<f64> {
        self.direction.iter().map(|v| self.radius * v).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarEnsemble {
    particles: Vec<PolarParticle>,
    dim: usize,
}

impl PolarEnsemble {
    pub fn new(particles: Vec<PolarParticle>) -> Result<Self> {
        let dim = particles
            .first()
            .map(|p| p.direction.len())
            .ok_or(Error::EmptyEnsemble)?;
        if particles.iter().any(|p| p.direction.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: particles
                    .iter()
                    .map(|p| p.direction.len())
                    .find(|&l| l != dim)
                    .unwrap_or(dim),
            });
        }
        Ok(PolarEnsemble { particles, dim })
    }

    pub fn particles(&self) -> &[PolarParticle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Joint parameter dimension d + 1.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total mass (1/m) sum_j r_j^2.
    pub fn total_mass(&self) -> f64 {
        let m = self.particles.len() as f64;
        self.particles.iter().map(|p| p.radius * p.radius).sum::<f64>() / m
    }
}

/// Splits every particle into radius and direction. Fails on a zero
/// particle, whose direction is undefined.
pub fn polar_decompose(e: &Ensemble) -> Result<PolarEnsemble> {
    let particles = e
        .particles()
        .iter()
        .map(|p| {
            let r = linalg::norm(&p.w);
            if r == 0.0 {
                return Err(Error::ZeroParticle);
            }
            let direction = p.w.iter().map(|v| v / r).collect();
            Ok(PolarParticle {
                radius: r,
                direction,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PolarEnsemble::new(particles)
}

/// Rebuilds Cartesian weights w_j = r_j eta_j.
pub fn polar_recompose(pe: &PolarEnsemble) -> Result<Ensemble> {
    Ensemble::new(
        pe.particles
            .iter()
            .map(|p| Particle::from_weights(p.weights()))
            .collect(),
    )
}

/// One explicit Euler step of the polar flow. All potentials are
/// evaluated at the pre-step measure, then radii and directions update
/// simultaneously; directions are renormalized to stay on the sphere.
pub fn polar_step(
    pe: &PolarEnsemble,
    ds: &Dataset,
    loss: Loss,
    act: Activation,
    gamma: f64,
) -> Result<PolarEnsemble> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    let cart = polar_recompose(pe)?;
    let pot = MeanPotential::of(&cart, ds, loss, act)?;
    let particles = pe
        .particles
        .par_iter()
        .map(|p| advance_particle(p, &pot, gamma))
        .collect::<Result<Vec<_>>>()?;
    PolarEnsemble::new(particles)
}

fn advance_particle(
    p: &PolarParticle,
    pot: &MeanPotential,
    gamma: f64,
) -> Result<PolarParticle> {
    let j = pot.value(&p.direction)?;
    let grad = pot.grad(&p.direction)?;
    if !j.is_finite() || !grad.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteGradient {
            particle: 0,
            step: 0,
        });
    }
    let radius = (p.radius * (1.0 - 2.0 * gamma * j)).max(0.0);
    let radial = linalg::dot(&grad, &p.direction);
    let tangent: Vec<f64> = grad
        .iter()
        .zip(&p.direction)
        .map(|(gv, ev)| gv - radial * ev)
        .collect();
    if tangent.iter().all(|&t| t == 0.0) {
        // stationary direction; skip the renormalization so exact fixed
        // points stay bitwise fixed
        return Ok(PolarParticle {
            radius,
            direction: p.direction.clone(),
        });
    }
    let mut direction: Vec<f64> = p
        .direction
        .iter()
        .zip(&tangent)
        .map(|(ev, tv)| ev - gamma * tv)
        .collect();
    let norm = linalg::norm(&direction);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    for v in &mut direction {
        *v /= norm;
    }
    Ok(PolarParticle { radius, direction })
}

/// Runs `iterations` polar Euler steps.
pub fn run_polar_flow(
    pe0: &PolarEnsemble,
    ds: &Dataset,
    loss: Loss,
    act: Activation,
    gamma: f64,
    iterations: usize,
) -> Result<PolarEnsemble> {
    let mut cur = pe0.clone();
    for _ in 0..iterations {
        cur = polar_step(&cur, ds, loss, act, gamma)?;
    }
    Ok(cur)
}

/// Integrates the same initial condition with the Cartesian and the
/// polar discretization over horizon T = gamma * round(T / gamma) and
/// returns the largest predictor discrepancy over the probe points.
pub fn equivalence_check(
    e0: &Ensemble,
    ds: &Dataset,
    loss: Loss,
    act: Activation,
    gamma: f64,
    horizon: f64,
    probes: &[Vec<f64>],
) -> Result<f64> {
    if !(horizon > 0.0) || !(gamma > 0.0) {
        return Err(Error::InvalidParameter(
            "horizon and step must be positive".into(),
        ));
    }
    let steps = (horizon / gamma).round().max(1.0) as usize;
    let cfg = crate::flow::FlowConfig::full_batch(gamma, steps, steps.max(1), 0);
    let cart = crate::flow::run_flow(e0, ds, loss, act, &cfg)?;
    if cart.diverged {
        return Err(Error::Diverged {
            step: steps,
            risk: cart.final_risk(),
        });
    }
    let polar = run_polar_flow(&polar_decompose(e0)?, ds, loss, act, gamma, steps)?;
    let polar_cart = polar_recompose(&polar)?;
    let mut sup = 0.0f64;
    for x in probes {
        let hc = cart.final_ensemble.predict(x, act)?;
        let hp = polar_cart.predict(x, act)?;
        sup = sup.max((hc - hp).abs());
    }
    Ok(sup)
}

/// Compares the one-step finite difference of a mass observable
/// a(nu) = integral of f d nu against its predicted rate
///
///   da/dt = (1/m) sum_j r_j^2 [ -4 f(eta_j) J(eta_j)
///                               - grad f(eta_j)^T (I - eta eta^T) grad J(eta_j) ].
///
/// Returns (finite-difference lhs, analytic rhs).
pub fn mass_evolution_check(
    pe: &PolarEnsemble,
    ds: &Dataset,
    loss: Loss,
    act: Activation,
    f: &dyn Fn(&[f64]) -> f64,
    grad_f: &dyn Fn(&[f64]) -> Vec<f64>,
    gamma: f64,
) -> Result<(f64, f64)> {
    let observable = |pe: &PolarEnsemble| -> f64 {
        let m = pe.len() as f64;
        pe.particles()
            .iter()
            .map(|p| p.radius * p.radius * f(&p.direction))
            .sum::<f64>()
            / m
    };
    let cart = polar_recompose(pe)?;
    let pot = MeanPotential::of(&cart, ds, loss, act)?;
    let m = pe.len() as f64;
    let mut rhs = 0.0;
    for p in pe.particles() {
        let j = pot.value(&p.direction)?;
        let grad_j = pot.grad(&p.direction)?;
        let gf = grad_f(&p.direction);
        if gf.len() != p.direction.len() {
            return Err(Error::DimensionMismatch {
                expected: p.direction.len(),
                got: gf.len(),
            });
        }
        let radial = linalg::dot(&grad_j, &p.direction);
        let mut tangential = 0.0;
        for ((gfv, gjv), ev) in gf.iter().zip(&grad_j).zip(&p.direction) {
            tangential += gfv * (gjv - radial * ev);
        }
        rhs += p.radius * p.radius * (-4.0 * f(&p.direction) * j - tangential);
    }
    rhs /= m;
    let before = observable(pe);
    let after = observable(&polar_step(pe, ds, loss, act, gamma)?);
    let lhs = (after - before) / gamma;
    Ok((lhs, rhs))
}
