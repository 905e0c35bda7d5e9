//! Test-error sweeps for both-layer vs output-layer-only training on
//! cluster data: one sweep over the sample count at fixed dimension,
//! one over the dimension at fixed sample count.

use crate::config::{RunConfig, TEST_SAMPLES};
use crate::error::CliResult;
use crate::output::{fnum, write_csv, write_json};
use meanfield::datagen::{ClusterDistribution, DataDistribution};
use meanfield::flow::init_ensemble;
use meanfield::loss::predictions;
use meanfield::margin::classification_error;
use meanfield::{seeding, Activation};
use serde_json::json;

use super::{
    par_map_reps, train_both_layers, train_output_only, with_bias_coordinate, STREAM_DATA,
    STREAM_INIT, STREAM_TEST,
};
use crate::experiments::bias2d::MAX_SAMPLE_ATTEMPTS;

struct PointRep {
    /// Indexed by route: 0 = both layers, 1 = output layer only.
    test_errors: [f64; 2],
    train_errors: [f64; 2],
    attempts: u64,
}

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let mut summary = serde_json::Map::new();
    if !cfg.n_grid.is_empty() {
        let results = sweep(cfg, "n", &cfg.n_grid, |&n| (n, cfg.d))?;
        summary.insert("sweep_n".into(), results);
    }
    if !cfg.d_grid.is_empty() {
        let results = sweep(cfg, "d", &cfg.d_grid, |&d| (cfg.n, d))?;
        summary.insert("sweep_d".into(), results);
    }
    write_json(cfg, "summary.json", summary)?;
    Ok(())
}

/// Runs one sweep; `point` maps a grid value to the (n, d) it sets.
fn sweep(
    cfg: &RunConfig,
    var: &str,
    grid: &[usize],
    point: impl Fn(&usize) -> (usize, usize),
) -> CliResult<serde_json::Value> {
    let mut rows = Vec::new();
    let mut mean_rows = Vec::new();
    let mut point_summaries = Vec::new();
    for value in grid {
        let (n, d) = point(value);
        let reps = par_map_reps(cfg.seed, cfg.repetitions, |_rep, rep_seed| {
            run_point(cfg, n, d, rep_seed)
        })?;
        let mut means = [0.0f64; 2];
        for (rep, r) in reps.iter().enumerate() {
            for route in 0..2 {
                rows.push(vec![
                    value.to_string(),
                    route.to_string(),
                    rep.to_string(),
                    fnum(r.test_errors[route]),
                ]);
                means[route] += r.test_errors[route];
            }
        }
        for m in &mut means {
            *m /= cfg.repetitions as f64;
        }
        for route in 0..2 {
            mean_rows.push(vec![
                value.to_string(),
                route.to_string(),
                fnum(means[route]),
            ]);
        }
        point_summaries.push(json!({
            var: value,
            "mean_test_error_both_layers": means[0],
            "mean_test_error_output_layer": means[1],
            "both_layers_at_most_output_layer": means[0] <= means[1],
            "repetitions": reps.iter().enumerate().map(|(rep, r)| json!({
                "repetition": rep,
                "sample_attempts": r.attempts,
                "train_error_both_layers": r.train_errors[0],
                "train_error_output_layer": r.train_errors[1],
                "test_error_both_layers": r.test_errors[0],
                "test_error_output_layer": r.test_errors[1],
            })).collect::<Vec<_>>(),
        }));
    }
    let extra = vec![
        ("route_0".to_string(), "both-layers".to_string()),
        ("route_1".to_string(), "output-layer".to_string()),
        ("test_samples".to_string(), TEST_SAMPLES.to_string()),
    ];
    write_csv(
        cfg,
        &format!("sweep_{var}.csv"),
        &extra,
        &[var, "route", "repetition", "test_error"],
        &rows,
    )?;
    write_csv(
        cfg,
        &format!("mean_{var}.csv"),
        &extra,
        &[var, "route", "mean_test_error"],
        &mean_rows,
    )?;
    Ok(json!(point_summaries))
}

/// One repetition at one grid point: shared initialization and test set
/// across the two training routes, so the comparison is paired.
fn run_point(cfg: &RunConfig, n: usize, d: usize, rep_seed: u64) -> CliResult<PointRep> {
    let dist = ClusterDistribution::new(cfg.k, d, rep_seed)?;
    // one extra input weight for the constant bias coordinate
    let mut init_rng = seeding::stream(rep_seed, STREAM_INIT);
    let e0 = init_ensemble(cfg.m, d + 1, &mut init_rng);

    let mut attempts = 0u64;
    let (both, output) = loop {
        let mut data_rng = seeding::stream(rep_seed, STREAM_DATA + attempts);
        let ds = with_bias_coordinate(&dist.sample(n, &mut data_rng)?)?;
        let both = train_both_layers(&e0, &ds, cfg.gamma, cfg.iterations)?;
        let output = train_output_only(&e0, &ds, cfg.gamma, cfg.iterations)?;
        attempts += 1;
        let separated = both.train_error == 0.0 && output.train_error == 0.0;
        if separated || attempts >= MAX_SAMPLE_ATTEMPTS {
            if !separated {
                eprintln!(
                    "warning: n={n} d={d}: not separated after {attempts} draws \
                     (train errors {:.3}/{:.3}); keeping last draw",
                    both.train_error, output.train_error
                );
            }
            break (both, output);
        }
        eprintln!("note: n={n} d={d}: not separated, resampling (attempt {attempts})");
    };

    let mut test_rng = seeding::stream(rep_seed, STREAM_TEST);
    let test = with_bias_coordinate(&dist.sample(TEST_SAMPLES, &mut test_rng)?)?;
    let mut test_errors = [0.0f64; 2];
    let mut train_errors = [0.0f64; 2];
    for (route, net) in [&both, &output].into_iter().enumerate() {
        let preds = predictions(&net.ensemble, &test, Activation::Relu)?;
        test_errors[route] = classification_error(&preds, test.labels())?;
        train_errors[route] = net.train_error;
    }
    Ok(PointRep {
        test_errors,
        train_errors,
        attempts,
    })
}
