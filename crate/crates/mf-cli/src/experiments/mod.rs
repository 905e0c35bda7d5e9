//! One submodule per experiment plus the training helpers they share.
//!
//! Seeding layout: every repetition gets its own u64 seed drawn from a
//! dedicated stream of the master seed, and purposes within a
//! repetition use fixed stream slots of that repetition seed (2 = init,
//! 10+ = data, 11 = test set; slots 0 and 1 belong to the SGD driver).
//! Aggregation walks repetition indices in order, so results do not
//! depend on the worker pool.

pub mod bias2d;
pub mod bias_highdim;
pub mod certificate;
pub mod equivalence;
pub mod particle_trace;
pub mod teacher_student;

use crate::error::{CliError, CliResult};
use meanfield::flow::gd_step;
use meanfield::kernel::{logistic_flow, RandomFeatures};
use meanfield::loss::{predictions, risk_of_predictions};
use meanfield::margin::classification_error;
use meanfield::{seeding, Activation, Dataset, Ensemble, Loss, Particle};
use rand::Rng;
use rayon::prelude::*;

/// Constant coordinate appended to inputs in the implicit-bias
/// experiments. The predictor is positively homogeneous in the raw
/// inputs, so its zero set through the origin could never enclose a
/// cluster; a constant coordinate gives every hidden unit an affine
/// offset while the weights stay 2-homogeneous. The value matches the
/// coordinate scale of the cluster domain.
pub const BIAS_INPUT: f64 = 0.5;

/// Stream slot for per-repetition seed draws.
const STREAM_REP_SEEDS: u64 = 2;
/// Stream slot for per-repetition ensemble initialization.
pub const STREAM_INIT: u64 = 2;
/// First stream slot for per-repetition training data (resample
/// attempts advance the slot).
pub const STREAM_DATA: u64 = 10;
/// Stream slot for per-repetition test data.
pub const STREAM_TEST: u64 = 11;

/// Independent seeds, one per repetition, drawn from the master seed.
pub fn rep_seeds(seed: u64, reps: usize) -> Vec<u64> {
    let mut rng = seeding::stream(seed, STREAM_REP_SEEDS);
    (0..reps).map(|_| rng.random()).collect()
}

/// Runs `f(rep, rep_seed)` over the worker pool; results come back in
/// repetition order regardless of scheduling.
pub fn par_map_reps<T, F>(seed: u64, reps: usize, f: F) -> CliResult<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> CliResult<T> + Sync,
{
    let seeds = rep_seeds(seed, reps);
    (0..reps)
        .into_par_iter()
        .map(|rep| f(rep, seeds[rep]))
        .collect()
}

pub struct TrainedNet {
    pub ensemble: Ensemble,
    pub train_error: f64,
    pub final_risk: f64,
}

/// Both-layer logistic training in the margin phase: plain gradient
/// steps with the step size divided by the current risk. Once the data
/// is separated the logistic gradient shrinks like the risk itself, so
/// this rescaling keeps the parameters moving at constant speed toward
/// the max-margin direction instead of stalling logarithmically.
pub fn train_both_layers(
    e0: &Ensemble,
    ds: &Dataset,
    gamma: f64,
    iterations: usize,
) -> CliResult<TrainedNet> {
    let mut e = e0.clone();
    for _ in 0..iterations {
        let preds = predictions(&e, ds, Activation::Relu)?;
        let risk = risk_of_predictions(&preds, ds.labels(), Loss::Logistic);
        if !risk.is_finite() {
            return Err(CliError::Runtime("both-layers training diverged".into()));
        }
        let step = gamma / risk.max(f64::MIN_POSITIVE);
        e = gd_step(&e, ds, Loss::Logistic, Activation::Relu, step)?;
    }
    let preds = predictions(&e, ds, Activation::Relu)?;
    let train_error = classification_error(&preds, ds.labels())?;
    let final_risk = risk_of_predictions(&preds, ds.labels(), Loss::Logistic);
    Ok(TrainedNet {
        ensemble: e,
        train_error,
        final_risk,
    })
}

/// Iteration multiplier for the output-layer route. Its normalized
/// steps grow the weight norm only linearly in the step count, so at a
/// matched step length its margin phase lags the rescaled both-layer
/// flow; each of its steps is also several times cheaper.
const OUTPUT_ITERATIONS_FACTOR: usize = 4;

/// Output-layer-only training: freezes the initial input weights as
/// random features and runs normalized logistic descent on the output
/// weights, then repackages the linear model as an ensemble (output
/// weight sqrt(m) * c_j on direction b_j) so downstream consumers see
/// the same interface as the both-layer net.
pub fn train_output_only(
    e0: &Ensemble,
    ds: &Dataset,
    step: f64,
    iterations: usize,
) -> CliResult<TrainedNet> {
    let dirs: Vec<Vec<f64>> = e0
        .particles()
        .iter()
        .map(|p| p.input_weights().to_vec())
        .collect();
    let rf = RandomFeatures::from_directions(&dirs, Activation::Relu)?;
    let xs: Vec<Vec<f64>> = ds.inputs().map(<[f64]>::to_vec).collect();
    let feats = rf.feature_matrix(&xs)?;
    let (c, _) = logistic_flow(
        &feats,
        ds.labels(),
        step,
        iterations * OUTPUT_ITERATIONS_FACTOR,
        0,
        None,
    )?;
    let scale = (rf.len() as f64).sqrt();
    let particles: Vec<Particle> = rf
        .directions()
        .zip(&c)
        .map(|(b, &cj)| Particle::new(scale * cj, b))
        .collect();
    let e = Ensemble::new(particles)?;
    let preds = predictions(&e, ds, Activation::Relu)?;
    let train_error = classification_error(&preds, ds.labels())?;
    let final_risk = risk_of_predictions(&preds, ds.labels(), Loss::Logistic);
    Ok(TrainedNet {
        ensemble: e,
        train_error,
        final_risk,
    })
}

/// The dataset with [`BIAS_INPUT`] appended to every input vector.
pub fn with_bias_coordinate(ds: &Dataset) -> CliResult<Dataset> {
    let xs: Vec<Vec<f64>> = ds
        .inputs()
        .map(|x| {
            let mut v = x.to_vec();
            v.push(BIAS_INPUT);
            v
        })
        .collect();
    Ok(Dataset::new(xs, ds.labels().to_vec())?)
}

/// Plotted particle positions |a_j| * b_j with the sign of a_j.
pub fn particle_positions(e: &Ensemble) -> Vec<(f64, f64, f64)> {
    e.particles()
        .iter()
        .map(|p| {
            let a = p.output_weight();
            let b = p.input_weights();
            (a.abs() * b[0], a.abs() * b[1], a.signum())
        })
        .collect()
}
