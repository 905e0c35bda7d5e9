//! Particle representation of the two-layer predictor.
//!
//! A particle is the joint weight vector `w = [a, b] in R^{d+1}` of one
//! hidden unit: output weight `a` and input weights `b`. Its prediction
//! is `psi(w)(x) = a * sigma(b'x)` and an ensemble of `m` particles
//! predicts the uniform average `(1/m) sum_j psi(w_j)(x)`.
//!
//! Two activations are supported:
//!
//! * `Relu`: `sigma(t) = max(t, 0)`, with the subgradient at zero fixed
//!   to 0 so flow runs are reproducible.
//! * `SmoothHomogeneous { tau }`: a C-infinity surrogate defined on unit
//!   preactivations by `sigma_tau(t) = (t + sqrt(t^2 + tau^2))/2 - tau/2`
//!   and extended to all of R^d by positive 1-homogeneity in `b`, i.e.
//!   `psi(w)(x) = a * |b| * sigma_tau(b'x / |b|)`. It agrees with ReLU up
//!   to `tau/2` on unit inputs and converges to it as `tau -> 0`.
//!
//! Both choices make `psi` positively 2-homogeneous in `w`, which is the
//! structural property the sphere reformulation and the optimality
//! certificate rely on. The smooth variant satisfies the Euler identity
//! `w' grad psi = 2 psi` everywhere; ReLU satisfies it wherever defined.

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    SmoothHomogeneous { tau: f64 },
}

impl Activation {
    /// sigma on a unit-norm preactivation.
    pub fn unit_value(self, t: f64) -> f64 {
        match self {
            Activation::Relu => t.max(0.0),
            Activation::SmoothHomogeneous { tau } => {
                0.5 * (t + (t * t + tau * tau).sqrt()) - 0.5 * tau
            }
        }
    }

    /// sigma' on a unit-norm preactivation (ReLU: 0 at the kink).
    pub fn unit_deriv(self, t: f64) -> f64 {
        match self {
            Activation::Relu => {
                if t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::SmoothHomogeneous { tau } => 0.5 * (1.0 + t / (t * t + tau * tau).sqrt()),
        }
    }

    pub fn is_smooth(self) -> bool {
        matches!(self, Activation::SmoothHomogeneous { .. })
    }
}

/// One hidden unit's joint weight vector `[a, b_1, ..., b_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub w: Vec<f64>,
}

impl Particle {
    pub fn new(output_weight: f64, input_weights: &[f64]) -> Self {
        let mut w = Vec::with_capacity(input_weights.len() + 1);
        w.push(output_weight);
        w.extend_from_slice(input_weights);
        Particle { w }
    }

    pub fn from_weights(w: Vec<f64>) -> Self {
        assert!(w.len() >= 2, "particle needs at least [a, b_1]");
        Particle { w }
    }

    pub fn output_weight(&self) -> f64 {
        self.w[0]
    }

    pub fn input_weights(&self) -> &[f64] {
        &self.w[1..]
    }

    /// Input dimension d.
    pub fn dim(&self) -> usize {
        self.w.len() - 1
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.w)
    }
}

/// psi(w)(x) for a raw weight slice. No dimension check: callers in hot
/// loops validate once up front.
pub(crate) fn psi_value_raw(w: &[f64], x: &[f64], act: Activation) -> f64 {
    let a = w[0];
    let b = &w[1..];
    match act {
        Activation::Relu => a * linalg::dot(b, x).max(0.0),
        Activation::SmoothHomogeneous { .. } => {
            let rho = linalg::norm(b);
            if rho == 0.0 {
                return 0.0;
            }
            a * rho * act.unit_value(linalg::dot(b, x) / rho)
        }
    }
}

/// grad_w psi(w)(x), written into `out` (length d+1).
pub(crate) fn psi_grad_raw(w: &[f64], x: &[f64], act: Activation, out: &mut [f64]) {
    let a = w[0];
    let b = &w[1..];
    match act {
        Activation::Relu => {
            let t = linalg::dot(b, x);
            if t > 0.0 {
                out[0] = t;
                for (o, xi) in out[1..].iter_mut().zip(x) {
                    *o = a * xi;
                }
            } else {
                out.fill(0.0);
            }
        }
        Activation::SmoothHomogeneous { .. } => {
            let rho = linalg::norm(b);
            if rho == 0.0 {
                out.fill(0.0);
                return;
            }
            let t = linalg::dot(b, x) / rho;
            let s = act.unit_value(t);
            let ds = act.unit_deriv(t);
            out[0] = rho * s;
            // grad_b [rho * sigma(t)] = sigma'(t) x + (sigma(t) - t sigma'(t)) b/rho
            let c = (s - t * ds) / rho;
            for ((o, xi), bi) in out[1..].iter_mut().zip(x).zip(b) {
                *o = a * (ds * xi + c * bi);
            }
        }
    }
}

/// Per-particle prediction `a * sigma(b'x)`.
pub fn psi_eval(p: &Particle, x: &[f64], act: Activation) -> Result<f64> {
    if x.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: x.len(),
        });
    }
    Ok(psi_value_raw(&p.w, x, act))
}

/// Gradient of `psi_eval` in the joint weights, a vector in R^{d+1}.
pub fn psi_grad(p: &Particle, x: &[f64], act: Activation) -> Result<Vec<f64>> {
    if x.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: x.len(),
        });
    }
    let mut out = vec![0.0; p.w.len()];
    psi_grad_raw(&p.w, x, act, &mut out);
    Ok(out)
}

/// An m-particle ensemble; the predictor is the uniform average of the
/// per-particle predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    particles: Vec<Particle>,
    dim: usize,
}

impl Ensemble {
    pub fn new(particles: Vec<Particle>) -> Result<Self> {
        let dim = particles.first().ok_or(Error::EmptyEnsemble)?.dim();
        for p in &particles {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
            if !p.w.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParameter("non-finite particle weight".into()));
            }
        }
        Ok(Ensemble { particles, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of particles m.
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub(crate) fn particles_mut(&mut self) -> &mut [Particle] {
        &mut self.particles
    }

    pub fn predict(&self, x: &[f64], act: Activation) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.predict_raw(x, act))
    }

    pub(crate) fn predict_raw(&self, x: &[f64], act: Activation) -> f64 {
        let m = self.particles.len() as f64;
        let sum = linalg::pairwise_sum_by(self.particles.len(), |j| {
            psi_value_raw(&self.particles[j].w, x, act)
        });
        sum / m
    }

    /// Mean squared particle norm `(1/m) sum_j |w_j|^2`, the natural
    /// 2-homogeneous weight scale (equals the total mass of the polar
    /// measure nu).
    pub fn weight_scale(&self) -> f64 {
        let m = self.particles.len() as f64;
        linalg::pairwise_sum_by(self.particles.len(), |j| {
            linalg::dot(&self.particles[j].w, &self.particles[j].w)
        }) / m
    }
}

/// Ensemble prediction `(1/m) sum_j psi(w_j)(x)`.
pub fn predict(e: &Ensemble, x: &[f64], act: Activation) -> Result<f64> {
    e.predict(x, act)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;
    use crate::testing::central_diff_gradient;
    use rand::Rng;

    const SMOOTH: Activation = Activation::SmoothHomogeneous { tau: 0.2 };

    #[test]
    fn psi_eval_relu_examples() {
        // p = (a=2, b=e1), x = (3,0) -> 2 * max(3,0) = 6
        let p = Particle::new(2.0, &[1.0, 0.0]);
        assert_eq!(psi_eval(&p, &[3.0, 0.0], Activation::Relu).unwrap(), 6.0);

        // scaling w by 2 quadruples the value
        let scaled = Particle::from_weights(p.w.iter().map(|v| 2.0 * v).collect());
        assert_eq!(
            psi_eval(&scaled, &[3.0, 0.0], Activation::Relu).unwrap(),
            24.0
        );

        // negative preactivation is clipped
        let q = Particle::new(1.0, &[1.0, 0.0]);
        assert_eq!(psi_eval(&q, &[-1.0, 0.0], Activation::Relu).unwrap(), 0.0);
    }

    #[test]
    fn psi_eval_rejects_dimension_mismatch() {
        let p = Particle::new(1.0, &[1.0, 0.0]);
        assert!(psi_eval(&p, &[1.0], Activation::Relu).is_err());
        assert!(psi_grad(&p, &[1.0, 2.0, 3.0], Activation::Relu).is_err());
    }

    #[test]
    fn psi_grad_relu_examples() {
        let p = Particle::new(2.0, &[1.0, 0.0]);
        assert_eq!(
            psi_grad(&p, &[3.0, 0.0], Activation::Relu).unwrap(),
            vec![3.0, 6.0, 0.0]
        );
        let q = Particle::new(1.0, &[1.0, 0.0]);
        assert_eq!(
            psi_grad(&q, &[-1.0, 0.0], Activation::Relu).unwrap(),
            vec![0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn psi_grad_smooth_matches_finite_differences() {
        let mut rng = seeding::stream(11, 0);
        for _ in 0..20 {
            let d = 3;
            let w: Vec<f64> = (0..d + 1).map(|_| rng.random_range(-1.5..1.5)).collect();
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            let p = Particle::from_weights(w.clone());
            let grad = psi_grad(&p, &x, SMOOTH).unwrap();
            let fd = central_diff_gradient(
                |wp| psi_value_raw(wp, &x, SMOOTH),
                &w,
                1e-5,
            );
            for (g, f) in grad.iter().zip(&fd) {
                let scale = 1.0 + g.abs().max(f.abs());
                assert!(
                    (g - f).abs() / scale < 1e-6,
                    "grad {g} vs fd {f} (w={w:?}, x={x:?})"
                );
            }
        }
    }

    #[test]
    fn euler_identity_holds() {
        let mut rng = seeding::stream(12, 0);
        for act in [Activation::Relu, SMOOTH] {
            for _ in 0..50 {
                let w: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let p = Particle::from_weights(w.clone());
                let v = psi_eval(&p, &x, act).unwrap();
                let g = psi_grad(&p, &x, act).unwrap();
                let lhs = crate::linalg::dot(&w, &g);
                assert!(
                    (lhs - 2.0 * v).abs() <= 1e-10 * (1.0 + v.abs()),
                    "Euler identity broke: w'grad = {lhs}, 2 psi = {}",
                    2.0 * v
                );
            }
        }
    }

    #[test]
    fn smooth_activation_tracks_relu_on_unit_inputs() {
        let tau = 0.05;
        let act = Activation::SmoothHomogeneous { tau };
        for t in [-3.0, -1.0, -0.2, 0.0, 0.2, 1.0, 3.0] {
            let relu = f64::max(t, 0.0);
            assert!(
                (act.unit_value(t) - relu).abs() <= 0.5 * tau + 1e-15,
                "t = {t}"
            );
        }
    }

    #[test]
    fn predict_averages_particles() {
        // particle values {6, 0} at x -> average 3
        let e = Ensemble::new(vec![
            Particle::new(2.0, &[1.0, 0.0]),
            Particle::new(1.0, &[-1.0, 0.0]),
        ])
        .unwrap();
        assert_eq!(e.predict(&[3.0, 0.0], Activation::Relu).unwrap(), 3.0);

        // m = 1 reduces to psi_eval
        let single = Ensemble::new(vec![Particle::new(2.0, &[1.0, 0.0])]).unwrap();
        assert_eq!(single.predict(&[3.0, 0.0], Activation::Relu).unwrap(), 6.0);
    }

    #[test]
    fn predict_scales_quadratically_under_relu() {
        let mut rng = seeding::stream(13, 0);
        let parts: Vec<Particle> = (0..5)
            .map(|_| {
                Particle::from_weights((0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            })
            .collect();
        let e = Ensemble::new(parts.clone()).unwrap();
        let lam = 3.0;
        let scaled = Ensemble::new(
            parts
                .iter()
                .map(|p| Particle::from_weights(p.w.iter().map(|v| lam * v).collect()))
                .collect(),
        )
        .unwrap();
        let x = [0.7, -0.4];
        let h = e.predict(&x, Activation::Relu).unwrap();
        let hs = scaled.predict(&x, Activation::Relu).unwrap();
        assert!((hs - lam * lam * h).abs() < 1e-12 * (1.0 + h.abs() * lam * lam));
    }

    #[test]
    fn predict_is_linear_in_the_measure() {
        let mut rng = seeding::stream(14, 0);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng, m: usize| -> Vec<Particle> {
            (0..m)
                .map(|_| {
                    Particle::from_weights((0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
                })
                .collect()
        };
        let p1 = mk(&mut rng, 3);
        let p2 = mk(&mut rng, 5);
        let e1 = Ensemble::new(p1.clone()).unwrap();
        let e2 = Ensemble::new(p2.clone()).unwrap();
        let merged = Ensemble::new(p1.into_iter().chain(p2).collect()).unwrap();
        let x = [0.3, 0.9];
        let expected = (3.0 * e1.predict(&x, Activation::Relu).unwrap()
            + 5.0 * e2.predict(&x, Activation::Relu).unwrap())
            / 8.0;
        let got = merged.predict(&x, Activation::Relu).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_ensemble_is_rejected() {
        assert!(Ensemble::new(vec![]).is_err());
    }
}
