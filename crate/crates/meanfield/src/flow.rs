//! Cartesian-coordinate optimizers on ensembles.
//!
//! `gd_step` applies the recursion `w_j <- w_j - gamma * m grad_{w_j} G(W)`
//! (the factor m is folded into the per-particle gradient, undoing the
//! 1/m in the predictor, so particle velocities and the m -> infinity
//! limit are well defined). `run_flow` iterates it as the Euler discretization of the
//! gradient flow; `run_sgd` does the same with fresh minibatches drawn
//! from a generative distribution each step.

use crate::datagen::DataDistribution;
use crate::error::{Error, Result};
use crate::loss::{
    predictions, risk_gradient_weights, risk_of_predictions, weighted_psi_grad_sum, Dataset, Loss,
};
use crate::model::{Activation, Ensemble, Particle};
use crate::seeding;
use rand::Rng;
use rayon::prelude::*;

/// Risk level beyond which a run is declared divergent. Far above any
/// legitimate experiment value.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Held-out evaluation set size for SGD risk snapshots.
pub const SGD_EVAL_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    FullBatch,
    Sgd { batch: usize },
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    /// Step size gamma.
    pub step: f64,
    /// Number of gradient steps K.
    pub iterations: usize,
    pub mode: Mode,
    /// Snapshot stride (in steps).
    pub record_every: usize,
    pub seed: u64,
    /// Optional early stop once the recorded risk falls below this value.
    pub stop_risk: Option<f64>,
}

impl FlowConfig {
    pub fn full_batch(step: f64, iterations: usize, record_every: usize, seed: u64) -> Self {
        FlowConfig {
            step,
            iterations,
            mode: Mode::FullBatch,
            record_every,
            seed,
            stop_risk: None,
        }
    }

    pub fn sgd(step: f64, iterations: usize, batch: usize, record_every: usize, seed: u64) -> Self {
        FlowConfig {
            step,
            iterations,
            mode: Mode::Sgd { batch },
            record_every,
            seed,
            stop_risk: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::InvalidParameter("step must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be >= 1".into()));
        }
        if let Mode::Sgd { batch } = self.mode {
            if batch == 0 {
                return Err(Error::InvalidParameter("batch must be >= 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Flow time t = k * gamma.
    pub time: f64,
    pub ensemble: Ensemble,
    pub risk: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub final_ensemble: Ensemble,
    /// Set when the run was aborted on a non-finite or exploding risk;
    /// the snapshots then form the partial trajectory up to the abort.
    pub diverged: bool,
}

impl Trajectory {
    pub fn final_risk(&self) -> f64 {
        self.snapshots.last().map(|s| s.risk).unwrap_or(f64::NAN)
    }
}

/// One gradient-descent step on the full dataset.
pub fn gd_step(
    e: &Ensemble,
    ds: &Dataset,
    loss: Loss,
    act: Activation,
    gamma: f64,
) -> Result<Ensemble> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    let preds = predictions(e, ds, act)?;
    let g = risk_gradient_weights(&preds, ds.labels(), loss);
    let mut next = e.clone();
    step_in_place(&mut next, ds, &g, act, gamma, 0)?;
    Ok(next)
}

/// Applies `w_j -= gamma * sum_i g_i grad psi(w_j)(x_i)` for all particles.
fn step_in_place(
    e: &mut Ensemble,
    ds: &Dataset,
    g: &[f64],
    act: Activation,
    gamma: f64,
    step_index: usize,
) -> Result<()> {
    let grads: Vec<Vec<f64>> = e
        .particles()
        .par_iter()
        .map(|p| weighted_psi_grad_sum(&p.w, ds, g, act))
        .collect();
    for (j, grad) in grads.iter().enumerate() {
        if !grad.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                particle: j,
                step: step_index,
            });
        }
    }
    for (p, grad) in e.particles_mut().iter_mut().zip(&grads) {
        crate::linalg::axpy(-gamma, grad, &mut p.w);
    }
    Ok(())
}

/// Full-batch gradient flow: K Euler steps with snapshots every
/// `record_every` steps (t = 0 and the final state are always recorded).
pub fn run_flow(
    e0: &Ensemble,
    ds: &Dataset,
    loss: Loss,
    act: Activation,
    cfg: &FlowConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut cur = e0.clone();
    let mut snapshots = Vec::new();
    let mut diverged = false;
    let mut k = 0usize;
    loop {
        let preds = predictions(&cur, ds, act)?;
        let risk = risk_of_predictions(&preds, ds.labels(), loss);
        if !risk.is_finite() || risk > DIVERGENCE_THRESHOLD {
            diverged = true;
            break;
        }
        let at_stride = k % cfg.record_every == 0;
        let stopping = cfg.stop_risk.is_some_and(|tol| risk <= tol);
        if at_stride || stopping || k == cfg.iterations {
            snapshots.push(Snapshot {
                time: k as f64 * cfg.step,
                ensemble: cur.clone(),
                risk,
            });
        }
        if k == cfg.iterations || stopping {
            break;
        }
        let g = risk_gradient_weights(&preds, ds.labels(), loss);
        if step_in_place(&mut cur, ds, &g, act, cfg.step, k).is_err() {
            diverged = true;
            break;
        }
        k += 1;
    }
    Ok(Trajectory {
        snapshots,
        final_ensemble: cur,
        diverged,
    })
}

/// SGD with fresh samples: each step draws a minibatch from `dist` and
/// applies one gradient step on it. Risk snapshots are computed on a
/// fixed held-out set of [`SGD_EVAL_SAMPLES`] samples drawn once per run.
pub fn run_sgd(
    e0: &Ensemble,
    dist: &dyn DataDistribution,
    loss: Loss,
    act: Activation,
    cfg: &FlowConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let batch = match cfg.mode {
        Mode::Sgd { batch } => batch,
        Mode::FullBatch => {
            return Err(Error::InvalidParameter(
                "run_sgd requires Mode::Sgd".into(),
            ))
        }
    };
    let mut batch_rng = seeding::stream(cfg.seed, 0);
    let mut eval_rng = seeding::stream(cfg.seed, 1);
    let eval = dist.sample(SGD_EVAL_SAMPLES, &mut eval_rng)?;

    let mut cur = e0.clone();
    let mut snapshots = Vec::new();
    let mut diverged = false;
    let mut k = 0usize;
    loop {
        let at_stride = k % cfg.record_every == 0;
        let last = k == cfg.iterations;
        let mut stopping = false;
        if at_stride || last {
            let preds = predictions(&cur, &eval, act)?;
            let risk = risk_of_predictions(&preds, eval.labels(), loss);
            if !risk.is_finite() || risk > DIVERGENCE_THRESHOLD {
                diverged = true;
                break;
            }
            stopping = cfg.stop_risk.is_some_and(|tol| risk <= tol);
            snapshots.push(Snapshot {
                time: k as f64 * cfg.step,
                ensemble: cur.clone(),
                risk,
            });
        }
        if last || stopping {
            break;
        }
        let minibatch = dist.sample(batch, &mut batch_rng)?;
        let preds = predictions(&cur, &minibatch, act)?;
        let g = risk_gradient_weights(&preds, minibatch.labels(), loss);
        if step_in_place(&mut cur, &minibatch, &g, act, cfg.step, k).is_err() {
            diverged = true;
            break;
        }
        k += 1;
    }
    Ok(Trajectory {
        snapshots,
        final_ensemble: cur,
        diverged,
    })
}

/// Standard experiment initialization: input weights uniform on the unit
/// sphere, output weight a uniform sign. Every particle then has norm
/// sqrt(2) exactly, so the plotted position |a| * b lies on the unit
/// circle at t = 0, and the initial directions cover the whole sphere in
/// distribution.
pub fn init_ensemble<R: Rng>(m: usize, d: usize, rng: &mut R) -> Ensemble {
    let particles = (0..m)
        .map(|_| {
            let a = seeding::rademacher(rng);
            let b = seeding::unit_sphere(d, rng);
            Particle::new(a, &b)
        })
        .collect();
    Ensemble::new(particles).expect("m >= 1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::FixedDataset;
    use crate::seeding;
    use rand::Rng;

    const SMOOTH: Activation = Activation::SmoothHomogeneous { tau: 0.3 };

    fn random_smooth_instance(seed: u64, m: usize, n: usize, d: usize) -> (Ensemble, Dataset) {
        let mut rng = seeding::stream(seed, 7);
        let e = init_ensemble(m, d, &mut rng);
        let xs = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        (e, Dataset::new(xs, ys).unwrap())
    }

    #[test]
    fn interpolating_ensemble_is_a_fixed_point() {
        let e = Ensemble::new(vec![Particle::new(2.0, &[1.0, 0.0])]).unwrap();
        let ds = Dataset::new(vec![vec![3.0, 0.0]], vec![6.0]).unwrap();
        let next = gd_step(&e, &ds, Loss::Square, Activation::Relu, 0.1).unwrap();
        assert_eq!(next, e);
    }

    #[test]
    fn hand_computed_single_step() {
        // gradient is (3, 2, 4) at w = (2, 1, 1); see loss tests
        let e = Ensemble::new(vec![Particle::new(2.0, &[1.0, 1.0])]).unwrap();
        let ds = Dataset::new(vec![vec![0.5, 1.0]], vec![1.0]).unwrap();
        let next = gd_step(&e, &ds, Loss::Square, Activation::Relu, 0.1).unwrap();
        let w = &next.particles()[0].w;
        assert!((w[0] - 1.7).abs() < 1e-15);
        assert!((w[1] - 0.8).abs() < 1e-15);
        assert!((w[2] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn two_half_steps_match_one_step_to_second_order() {
        let (e, ds) = random_smooth_instance(3, 4, 6, 2);
        let err = |gamma: f64| -> f64 {
            let one = gd_step(&e, &ds, Loss::Square, SMOOTH, 2.0 * gamma).unwrap();
            let two = gd_step(
                &gd_step(&e, &ds, Loss::Square, SMOOTH, gamma).unwrap(),
                &ds,
                Loss::Square,
                SMOOTH,
                gamma,
            )
            .unwrap();
            one.particles()
                .iter()
                .zip(two.particles())
                .flat_map(|(p, q)| p.w.iter().zip(&q.w).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max)
        };
        let e1 = err(0.01);
        let e2 = err(0.005);
        // halving gamma should shrink the O(gamma^2) mismatch about 4x
        assert!(e1 > 0.0 && e2 > 0.0);
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn zero_iterations_record_initial_state_only() {
        let (e, ds) = random_smooth_instance(4, 3, 5, 2);
        let cfg = FlowConfig::full_batch(0.1, 0, 1, 0);
        let traj = run_flow(&e, &ds, Loss::Square, SMOOTH, &cfg).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.snapshots[0].time, 0.0);
        assert_eq!(traj.final_ensemble, e);
        assert!(!traj.diverged);
    }

    #[test]
    fn risk_is_monotone_for_small_steps() {
        for seed in 0..10u64 {
            let (e, ds) = random_smooth_instance(100 + seed, 5, 8, 3);
            let cfg = FlowConfig::full_batch(0.02, 60, 1, 0);
            let traj = run_flow(&e, &ds, Loss::Square, SMOOTH, &cfg).unwrap();
            assert!(!traj.diverged);
            for pair in traj.snapshots.windows(2) {
                assert!(
                    pair[1].risk <= pair[0].risk + 1e-12,
                    "risk increased on seed {seed}: {} -> {}",
                    pair[0].risk,
                    pair[1].risk
                );
            }
        }
    }

    #[test]
    fn euler_consistency_under_step_halving() {
        let (e, ds) = random_smooth_instance(42, 4, 6, 2);
        let probes: Vec<Vec<f64>> = {
            let mut rng = seeding::stream(43, 0);
            (0..8)
                .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect()
        };
        let run = |gamma: f64, k: usize| -> Vec<f64> {
            let cfg = FlowConfig::full_batch(gamma, k, k, 0);
            let traj = run_flow(&e, &ds, Loss::Square, SMOOTH, &cfg).unwrap();
            probes
                .iter()
                .map(|x| traj.final_ensemble.predict(x, SMOOTH).unwrap())
                .collect()
        };
        let base = run(0.02, 100);
        let half = run(0.01, 200);
        let quarter = run(0.005, 400);
        let diff = |a: &[f64], b: &[f64]| -> f64 {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        let d1 = diff(&base, &half);
        let d2 = diff(&half, &quarter);
        let ratio = d1 / d2;
        assert!(
            (1.5..2.5).contains(&ratio),
            "expected first-order step-halving ratio, got {ratio} ({d1} vs {d2})"
        );
    }

    #[test]
    fn divergence_is_flagged_with_partial_trajectory() {
        let (e, ds) = random_smooth_instance(9, 4, 6, 2);
        // absurd step size blows the iterates up
        let cfg = FlowConfig::full_batch(1e9, 200, 10, 0);
        let traj = run_flow(&e, &ds, Loss::Square, SMOOTH, &cfg).unwrap();
        assert!(traj.diverged);
        assert!(!traj.snapshots.is_empty());
        assert!(traj.snapshots.iter().all(|s| s.risk.is_finite()));
    }

    #[test]
    fn trajectories_are_deterministic_across_thread_pools() {
        let (e, ds) = random_smooth_instance(11, 6, 10, 3);
        let cfg = FlowConfig::full_batch(0.05, 40, 10, 123);
        let run_in_pool = |threads: usize| -> Vec<f64> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let traj = run_flow(&e, &ds, Loss::Square, SMOOTH, &cfg).unwrap();
                traj.final_ensemble
                    .particles()
                    .iter()
                    .flat_map(|p| p.w.iter().copied())
                    .collect()
            })
        };
        let w1 = run_in_pool(1);
        let w2 = run_in_pool(4);
        assert_eq!(w1, w2, "bitwise trajectory mismatch across pools");
    }

    #[test]
    fn sgd_with_full_fixed_batch_matches_gd() {
        let (e, ds) = random_smooth_instance(21, 4, 8, 2);
        let dist = FixedDataset::new(ds.clone());
        let n = ds.len();
        let sgd_cfg = FlowConfig::sgd(0.05, 30, n, 5, 77);
        let gd_cfg = FlowConfig::full_batch(0.05, 30, 5, 77);
        let sgd = run_sgd(&e, &dist, Loss::Square, SMOOTH, &sgd_cfg).unwrap();
        let gd = run_flow(&e, &ds, Loss::Square, SMOOTH, &gd_cfg).unwrap();
        assert_eq!(
            sgd.final_ensemble, gd.final_ensemble,
            "degenerate SGD should match GD step for step"
        );
    }

    #[test]
    fn sgd_risk_decreases_on_average() {
        // tiny teacher-student run: held-out square risk should drop
        let mut rng = seeding::stream(31, 0);
        let teacher = crate::datagen::make_teacher(3, 2, 5, Default::default());
        let e0 = init_ensemble(16, 3, &mut rng);
        let cfg = FlowConfig::sgd(0.02, 400, 16, 100, 99);
        let traj = run_sgd(&e0, &teacher, Loss::Square, Activation::Relu, &cfg).unwrap();
        assert!(!traj.diverged);
        let first = traj.snapshots.first().unwrap().risk;
        let last = traj.snapshots.last().unwrap().risk;
        assert!(last < first, "held-out risk did not decrease: {first} -> {last}");
    }

    #[test]
    fn config_validation() {
        assert!(FlowConfig::full_batch(0.0, 1, 1, 0).validate().is_err());
        assert!(FlowConfig::full_batch(0.1, 1, 0, 0).validate().is_err());
        assert!(FlowConfig::sgd(0.1, 1, 0, 1, 0).validate().is_err());
        assert!(FlowConfig::sgd(0.1, 1, 4, 1, 0).validate().is_ok());
    }
}
