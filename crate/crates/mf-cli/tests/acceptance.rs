//! End-to-end acceptance checks, one test per headline property.
//!
//! Each test prints `ACCEPTANCE <name>: PASS` (visible with
//! `--nocapture`) and enforces its own wall-clock budget, so a plain
//! `cargo test --test acceptance` doubles as the sign-off checklist.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use meanfield::datagen::{make_teacher, sample_teacher, WeightLaw};
use meanfield::flow::{init_ensemble, run_flow, FlowConfig};
use meanfield::kernel::{
    closed_form_kernel, logistic_flow, max_margin_linear, max_margin_qp, monte_carlo_kernel,
    KernelMatrix, RandomFeatures,
};
use meanfield::linalg;
use meanfield::loss::{objective_gradient, risk_of_predictions, predictions};
use meanfield::margin::direction_distance;
use meanfield::model::psi_eval;
use meanfield::potential::{optimality_certificate_default, MeanPotential, Verdict};
use meanfield::seeding;
use meanfield::sphere::{equivalence_check, mass_evolution_check, polar_decompose};
use meanfield::testing::{central_diff_gradient, max_relative_error};
use meanfield::{Activation, Dataset, Ensemble, Error, Loss, Particle};
use rand::Rng;

fn finish(name: &str, start: Instant, budget_secs: f64) {
    let secs = start.elapsed().as_secs_f64();
    assert!(
        secs < budget_secs,
        "{name} exceeded its {budget_secs} s budget ({secs:.1} s)"
    );
    println!("ACCEPTANCE {name}: PASS ({secs:.1} s)");
}

fn random_instance(
    rng: &mut impl Rng,
    m: usize,
    n: usize,
    d: usize,
    pm_labels: bool,
) -> (Ensemble, Dataset) {
    let e = init_ensemble(m, d, rng);
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let ys: Vec<f64> = (0..n)
        .map(|_| {
            if pm_labels {
                seeding::rademacher(rng)
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    (e, Dataset::new(xs, ys).unwrap())
}

#[test]
fn acceptance_gradients_match_finite_differences() {
    let start = Instant::now();
    let mut rng = seeding::stream(1001, 0);
    for instance in 0..50u32 {
        let d = rng.random_range(1..=5);
        let m = rng.random_range(1..=8);
        let n = rng.random_range(1..=10);
        let loss = if instance % 2 == 0 {
            Loss::Square
        } else {
            Loss::Logistic
        };
        let act = Activation::SmoothHomogeneous {
            tau: rng.random_range(0.2..0.6),
        };
        let pm = matches!(loss, Loss::Logistic);
        let (e, ds) = random_instance(&mut rng, m, n, d, pm);

        let analytic = objective_gradient(&e, &ds, loss, act).unwrap();
        for (j, particle) in e.particles().iter().enumerate() {
            let others = e.clone();
            let fd = central_diff_gradient(
                |w| {
                    let mut ps = others.particles().to_vec();
                    ps[j] = Particle::from_weights(w.to_vec());
                    let probe = Ensemble::new(ps).unwrap();
                    let preds = predictions(&probe, &ds, act).unwrap();
                    // objective_gradient carries the factor m
                    m as f64 * risk_of_predictions(&preds, ds.labels(), loss)
                },
                &particle.w,
                1e-5,
            );
            let rel = max_relative_error(&analytic[j], &fd);
            assert!(rel < 1e-5, "objective gradient off by {rel} (instance {instance})");
        }

        let pot = MeanPotential::of(&e, &ds, loss, act).unwrap();
        let w: Vec<f64> = (0..=d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let analytic = pot.grad(&w).unwrap();
        let fd = central_diff_gradient(|v| pot.value(v).unwrap(), &w, 1e-5);
        let rel = max_relative_error(&analytic, &fd);
        assert!(rel < 1e-5, "potential gradient off by {rel} (instance {instance})");
    }
    finish("gradients-vs-finite-differences", start, 10.0);
}

#[test]
fn acceptance_two_homogeneity_and_euler_identity() {
    let start = Instant::now();
    let mut rng = seeding::stream(1002, 0);
    for pair in 0..100u32 {
        let d = rng.random_range(1..=4);
        let act = if pair % 2 == 0 {
            Activation::Relu
        } else {
            Activation::SmoothHomogeneous { tau: 0.4 }
        };
        let (e, ds) = random_instance(&mut rng, 4, 6, d, false);
        let w: Vec<f64> = (0..=d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lambda: f64 = rng.random_range(0.25..4.0);
        let scaled: Vec<f64> = w.iter().map(|v| lambda * v).collect();

        for _ in 0..3 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let base = psi_eval(&Particle::from_weights(w.clone()), &x, act).unwrap();
            let up = psi_eval(&Particle::from_weights(scaled.clone()), &x, act).unwrap();
            let rel = (up - lambda * lambda * base).abs() / (1.0 + up.abs());
            assert!(rel < 1e-10, "psi not 2-homogeneous, rel {rel}");
        }

        let pot = MeanPotential::of(&e, &ds, Loss::Square, act).unwrap();
        let j = pot.value(&w).unwrap();
        let j_scaled = pot.value(&scaled).unwrap();
        let rel = (j_scaled - lambda * lambda * j).abs() / (1.0 + j_scaled.abs());
        assert!(rel < 1e-10, "potential not 2-homogeneous, rel {rel}");

        let grad = pot.grad(&w).unwrap();
        let euler = linalg::dot(&w, &grad);
        let rel = (euler - 2.0 * j).abs() / (1.0 + euler.abs());
        assert!(rel < 1e-10, "Euler identity off, rel {rel}");
    }
    finish("two-homogeneity-and-euler", start, 1.0);
}

#[test]
fn acceptance_cartesian_polar_equivalence() {
    let start = Instant::now();
    let act = Activation::SmoothHomogeneous { tau: 0.25 };
    for seed in 0..3u64 {
        let teacher = make_teacher(2, 4, seed, WeightLaw::SphereRademacher);
        let ds = sample_teacher(&teacher, 8, &mut seeding::stream(seed, 1)).unwrap();
        let e0 = init_ensemble(10, 2, &mut seeding::stream(seed, 2));
        let mut probe_rng = seeding::stream(seed, 3);
        let probes: Vec<Vec<f64>> = (0..16)
            .map(|_| {
                (0..2)
                    .map(|_| probe_rng.sample(rand_distr::StandardNormal))
                    .collect()
            })
            .collect();
        let gamma = 1e-3;
        let disc = equivalence_check(&e0, &ds, Loss::Square, act, gamma, 1.0, &probes).unwrap();
        assert!(disc < 1e-2, "seed {seed}: discrepancy {disc}");
        let half = equivalence_check(&e0, &ds, Loss::Square, act, gamma / 2.0, 1.0, &probes).unwrap();
        assert!(
            disc >= 1.5 * half,
            "seed {seed}: halving the step only took {disc} to {half}"
        );
    }
    finish("cartesian-polar-equivalence", start, 30.0);
}

#[test]
fn acceptance_mass_evolution_identity() {
    let start = Instant::now();
    let act = Activation::SmoothHomogeneous { tau: 0.3 };
    let gamma = 1e-4;
    for seed in 0..5u64 {
        let mut rng = seeding::stream(2000 + seed, 0);
        let d = 2;
        let (e, ds) = random_instance(&mut rng, 6, 8, d, false);
        let pe = polar_decompose(&e).unwrap();

        let mut observables: Vec<(
            Box<dyn Fn(&[f64]) -> f64>,
            Box<dyn Fn(&[f64]) -> Vec<f64>>,
        )> = vec![(Box::new(|_: &[f64]| 1.0), Box::new(|eta: &[f64]| vec![0.0; eta.len()]))];
        for i in 0..=d {
            observables.push((
                Box::new(move |eta: &[f64]| eta[i]),
                Box::new(move |eta: &[f64]| {
                    let mut g = vec![0.0; eta.len()];
                    g[i] = 1.0;
                    g
                }),
            ));
        }
        for (f, grad_f) in &observables {
            let (lhs, rhs) =
                mass_evolution_check(&pe, &ds, Loss::Square, act, f, grad_f, gamma).unwrap();
            assert!(
                (lhs - rhs).abs() < 1e-2 * rhs.abs().max(1.0),
                "seed {seed}: rate {lhs} vs predicted {rhs}"
            );
        }
    }
    finish("mass-evolution-identity", start, 10.0);
}

#[test]
fn acceptance_teacher_student_recovery_and_certificates() {
    let start = Instant::now();
    let seeds = 10u64;
    let mut success = [0usize; 2]; // [m=5, m=100]
    let mut certified_successes = 0usize;
    let mut total_successes = 0usize;
    let mut violated_stuck_small = 0usize;
    let mut stuck_small = 0usize;
    for seed in 0..seeds {
        let teacher = make_teacher(2, 4, seed, WeightLaw::SphereRademacher);
        let ds = sample_teacher(&teacher, 24, &mut seeding::stream(seed, 1)).unwrap();
        for (slot, m) in [5usize, 100].into_iter().enumerate() {
            let e0 = init_ensemble(m, 2, &mut seeding::stream(seed, 2));
            let mut cfg = FlowConfig::full_batch(0.05, 120_000, 120_000, seed);
            cfg.stop_risk = Some(1e-9);
            let traj = run_flow(&e0, &ds, Loss::Square, Activation::Relu, &cfg).unwrap();
            assert!(!traj.diverged, "seed {seed} m={m} diverged");
            let ok = traj.final_risk() < 1e-3;
            if ok {
                success[slot] += 1;
            }
            let report = optimality_certificate_default(
                &traj.final_ensemble,
                &ds,
                Loss::Square,
                Activation::Relu,
                256,
                seed,
            )
            .unwrap();
            if ok {
                total_successes += 1;
                if report.verdict == Verdict::CertifiedUpToProbes {
                    certified_successes += 1;
                }
            } else if m == 5 {
                stuck_small += 1;
                if report.verdict == Verdict::Violated {
                    violated_stuck_small += 1;
                }
            }
        }
    }
    let rate5 = success[0] as f64 / seeds as f64;
    let rate100 = success[1] as f64 / seeds as f64;
    assert!(rate100 >= 0.9, "wide recovery rate {rate100}");
    assert!(rate100 > rate5, "rates {rate100} vs {rate5}");
    assert_eq!(
        certified_successes, total_successes,
        "only {certified_successes} of {total_successes} successful runs certified"
    );
    assert!(stuck_small > 0, "no stuck narrow run to examine");
    assert!(
        violated_stuck_small > 0,
        "no stuck narrow run flagged as violated"
    );
    finish("teacher-student-recovery", start, 300.0);
}

#[test]
fn acceptance_wide_feature_kernel_matches_closed_form() {
    let start = Instant::now();
    // the closed form must first survive its Monte Carlo oracle
    let mut mc_rng = seeding::stream(3000, 0);
    let mut pair_rng = seeding::stream(3001, 0);
    for _ in 0..3 {
        let x = seeding::unit_sphere(3, &mut pair_rng);
        let y = seeding::unit_sphere(3, &mut pair_rng);
        let exact = closed_form_kernel(&x, &y).unwrap();
        let mc = monte_carlo_kernel(&x, &y, 10_000_000, &mut mc_rng).unwrap();
        assert!(
            (exact - mc).abs() <= 1e-2 * exact.abs().max(1e-3),
            "closed form {exact} vs Monte Carlo {mc}"
        );
    }

    let mut rng = seeding::stream(3002, 0);
    let rf = RandomFeatures::sample(1_000_000, 3, Activation::Relu, &mut rng).unwrap();
    for _ in 0..100 {
        let x = seeding::unit_sphere(3, &mut pair_rng);
        let y = seeding::unit_sphere(3, &mut pair_rng);
        let exact = closed_form_kernel(&x, &y).unwrap();
        let emp = rf.empirical_kernel(&x, &y).unwrap();
        let rel = (emp - exact).abs() / exact.abs().max(1e-12);
        assert!(rel < 1e-2, "empirical kernel off by {rel}");
    }
    finish("wide-feature-kernel", start, 60.0);
}

fn planted_separable(
    rng: &mut impl Rng,
    d: usize,
    n: usize,
    gap: f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let planted = seeding::unit_sphere(d, rng);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    while xs.len() < n {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = linalg::dot(&planted, &x);
        if m.abs() > gap {
            ys.push(m.signum());
            xs.push(x);
        }
    }
    (xs, ys)
}

#[test]
fn acceptance_linear_logistic_flow_reaches_max_margin() {
    let start = Instant::now();
    for seed in 0..10u64 {
        let mut rng = seeding::stream(4000 + seed, 0);
        let (xs, ys) = planted_separable(&mut rng, 5, 20, 0.1);

        let theta = max_margin_linear(&xs, &ys).unwrap();
        let k = KernelMatrix::from_points(&xs, |a, b| Ok(linalg::dot(a, b))).unwrap();
        let qp = max_margin_qp(&k, &ys).unwrap();
        for (i, x) in xs.iter().enumerate() {
            let gap = (linalg::dot(&theta, x) - qp.decision_values[i]).abs();
            assert!(gap < 1e-6, "seed {seed}: route mismatch {gap}");
        }

        let (c, _) = logistic_flow(&xs, &ys, 0.05, 20_000, 0, None).unwrap();
        let dist = direction_distance(&c, &theta).unwrap();
        assert!(dist < 1e-2, "seed {seed}: direction gap {dist}");
    }
    finish("linear-implicit-bias", start, 120.0);
}

#[test]
fn acceptance_max_margin_qp_kkt() {
    let start = Instant::now();
    for seed in 0..20u64 {
        let mut rng = seeding::stream(5000 + seed, 0);
        let d = rng.random_range(2..=5);
        let n = rng.random_range(8..=24);
        let (xs, ys) = planted_separable(&mut rng, d, n, 0.15);
        let k = KernelMatrix::from_points(&xs, |a, b| Ok(linalg::dot(a, b))).unwrap();
        let sol = max_margin_qp(&k, &ys).unwrap();
        assert!(sol.kkt_residual < 1e-6, "seed {seed}: residual {}", sol.kkt_residual);
        for i in 0..xs.len() {
            let dual = ys[i] * sol.alpha[i];
            let slack = ys[i] * sol.decision_values[i] - 1.0;
            assert!(dual >= -1e-9, "seed {seed}: negative dual {dual}");
            assert!(slack >= -1e-6, "seed {seed}: infeasible point, slack {slack}");
            assert!(
                dual * slack <= 1e-6 * (1.0 + dual),
                "seed {seed}: complementary slackness {dual} * {slack}"
            );
        }
    }

    // one point with both labels can never be separated
    let xs = vec![vec![0.3, 0.7], vec![0.3, 0.7]];
    let k = KernelMatrix::from_points(&xs, |a, b| Ok(linalg::dot(a, b))).unwrap();
    assert!(matches!(
        max_margin_qp(&k, &[1.0, -1.0]),
        Err(Error::NotSeparable(_))
    ));
    finish("max-margin-qp-kkt", start, 30.0);
}

fn run_cli(args: &[&str], dir: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_mf"))
        .args(args)
        .current_dir(dir)
        .status()
        .expect("spawn CLI");
    assert!(status.success(), "mf {args:?} failed with {status}");
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn acceptance_implicit_bias_contrast() {
    let start = Instant::now();
    let dir = tmp_dir("bias-contrast");

    run_cli(
        &["implicit-bias-2d", "--seed", "1", "--out", "planar"],
        &dir,
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("planar/summary.json")).unwrap())
            .unwrap();
    let rough = summary["both_layers_rougher_count"].as_u64().unwrap();
    assert!(rough >= 3, "both-layers rougher on only {rough} of 4 repetitions");

    run_cli(&["implicit-bias-highdim", "--out", "highdim"], &dir);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("highdim/summary.json")).unwrap())
            .unwrap();
    let point = summary["sweep_d"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["d"] == serde_json::json!(15))
        .expect("d = 15 point");
    let both = point["mean_test_error_both_layers"].as_f64().unwrap();
    let output = point["mean_test_error_output_layer"].as_f64().unwrap();
    assert!(
        both <= output,
        "mean test errors {both} (both layers) vs {output} (output layer)"
    );
    finish("implicit-bias-contrast", start, 600.0);
}

#[test]
fn acceptance_rerun_determinism() {
    let start = Instant::now();
    let a = tmp_dir("determinism-a");
    let b = tmp_dir("determinism-b");
    run_cli(&["particle-trace", "--threads", "1", "--out", "run"], &a);
    run_cli(&["particle-trace", "--threads", "3", "--out", "run"], &b);

    let mut names: Vec<String> = std::fs::read_dir(a.join("run"))
        .unwrap()
        .map(|f| f.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let left = std::fs::read(a.join("run").join(&name)).unwrap();
        let right = std::fs::read(b.join("run").join(&name)).unwrap();
        assert_eq!(left, right, "{name} differs between worker counts");
    }
    finish("rerun-determinism", start, 60.0);
}
