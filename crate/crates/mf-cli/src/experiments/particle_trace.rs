//! Particle-cloud traces against a planted planar teacher: one SGD run
//! per student width, snapshots of the plotted positions |a_j| b_j, and
//! a quantified recovery verdict per teacher neuron.

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{fnum, out_path, write_csv, write_json, write_svg, CsvData};
use crate::svg;
use meanfield::datagen::{make_teacher, WeightLaw};
use meanfield::flow::{init_ensemble, run_sgd, FlowConfig};
use meanfield::{linalg, seeding, Activation, Ensemble, Loss};
use serde_json::json;

use super::{particle_positions, rep_seeds, STREAM_INIT};

/// A teacher direction counts as recovered when some live particle of
/// the right output sign lies within this angle of it.
pub const RECOVERY_ANGLE_RAD: f64 = 0.1;
/// Particles below this fraction of the largest |a| |b| are ignored by
/// the recovery criterion (they carry no trainable mass).
pub const RECOVERY_MASS_CUTOFF: f64 = 0.05;

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let teacher = make_teacher(2, cfg.m0, cfg.seed, WeightLaw::SphereRademacher);
    let teacher_rows: Vec<Vec<String>> = (0..teacher.units())
        .map(|j| {
            let u = teacher.unit_input(j);
            let v = teacher.unit_output(j);
            // plotted position |v| u, sign from v
            vec![
                j.to_string(),
                fnum(v.abs() * u[0]),
                fnum(v.abs() * u[1]),
                fnum(v.signum()),
            ]
        })
        .collect();
    write_csv(cfg, "teacher.csv", &[], &["unit", "x", "y", "sign"], &teacher_rows)?;

    let run_seeds = rep_seeds(cfg.seed, cfg.m_grid.len());
    let mut report_runs = Vec::new();
    for (idx, &m) in cfg.m_grid.iter().enumerate() {
        let run_seed = run_seeds[idx];
        let mut init_rng = seeding::stream(run_seed, STREAM_INIT);
        let e0 = init_ensemble(m, 2, &mut init_rng);
        let flow_cfg = FlowConfig::sgd(
            cfg.gamma,
            cfg.iterations,
            cfg.batch,
            cfg.record_every,
            run_seed,
        );
        let traj = run_sgd(&e0, &teacher, Loss::Square, Activation::Relu, &flow_cfg)?;
        if traj.diverged {
            return Err(CliError::Runtime(format!(
                "particle trace m={m} diverged (risk {:e})",
                traj.final_risk()
            )));
        }

        let mut rows = Vec::new();
        for (si, snap) in traj.snapshots.iter().enumerate() {
            for (j, (x, y, sign)) in particle_positions(&snap.ensemble).into_iter().enumerate() {
                rows.push(vec![
                    si.to_string(),
                    fnum(snap.time),
                    j.to_string(),
                    fnum(x),
                    fnum(y),
                    fnum(sign),
                ]);
            }
        }
        let extra = vec![
            ("student_m".into(), m.to_string()),
            ("run_seed".into(), run_seed.to_string()),
            (
                "recovery_threshold_rad".into(),
                fnum(RECOVERY_ANGLE_RAD),
            ),
        ];
        let csv_name = format!("trace_m{m}.csv");
        write_csv(
            cfg,
            &csv_name,
            &extra,
            &["snapshot", "time", "particle", "x", "y", "sign"],
            &rows,
        )?;
        render_svg(cfg, &csv_name, &format!("trace_m{m}.svg"))?;

        let recovery = recovery_report(&traj.final_ensemble, &teacher);
        report_runs.push(json!({
            "m": m,
            "run_seed": run_seed,
            "final_risk": traj.final_risk(),
            "snapshots": traj.snapshots.len(),
            "recovered": recovery.iter().all(|r| r["matched"] == json!(true)),
            "per_teacher_unit": recovery,
        }));
    }

    let mut body = serde_json::Map::new();
    body.insert(
        "recovery_threshold_rad".into(),
        json!(RECOVERY_ANGLE_RAD),
    );
    body.insert("mass_cutoff".into(), json!(RECOVERY_MASS_CUTOFF));
    body.insert("runs".into(), json!(report_runs));
    write_json(cfg, "recovery.json", body)?;
    Ok(())
}

/// Per teacher unit: the best angular distance over live particles of
/// matching output sign, and whether it clears the threshold.
fn recovery_report(
    e: &Ensemble,
    teacher: &meanfield::datagen::TeacherNetwork,
) -> Vec<serde_json::Value> {
    let masses: Vec<f64> = e
        .particles()
        .iter()
        .map(|p| p.output_weight().abs() * linalg::norm(p.input_weights()))
        .collect();
    let max_mass = masses.iter().copied().fold(0.0, f64::max);
    (0..teacher.units())
        .map(|j| {
            let u = teacher.unit_input(j);
            let v = teacher.unit_output(j);
            let mut best = f64::INFINITY;
            for (p, &mass) in e.particles().iter().zip(&masses) {
                if mass < RECOVERY_MASS_CUTOFF * max_mass {
                    continue;
                }
                if p.output_weight().signum() != v.signum() {
                    continue;
                }
                let angle = linalg::angle_between(p.input_weights(), u);
                if angle < best {
                    best = angle;
                }
            }
            json!({
                "unit": j,
                "best_angle_rad": if best.is_finite() { json!(best) } else { json!(null) },
                "matched": best <= RECOVERY_ANGLE_RAD,
            })
        })
        .collect()
}

/// Draws the final snapshot of a trace CSV next to the teacher CSV.
fn render_svg(cfg: &RunConfig, trace_csv: &str, svg_name: &str) -> CliResult<()> {
    let trace = CsvData::read(&out_path(cfg, trace_csv))?;
    let (si, xi, yi, gi) = (
        trace.col("snapshot")?,
        trace.col("x")?,
        trace.col("y")?,
        trace.col("sign")?,
    );
    let last = trace
        .rows
        .iter()
        .map(|r| r[si])
        .fold(f64::NEG_INFINITY, f64::max);
    let particles: Vec<(f64, f64, f64)> = trace
        .rows
        .iter()
        .filter(|r| r[si] == last)
        .map(|r| (r[xi], r[yi], r[gi]))
        .collect();
    let teacher = CsvData::read(&out_path(cfg, "teacher.csv"))?;
    let (tx, ty, tg) = (teacher.col("x")?, teacher.col("y")?, teacher.col("sign")?);
    let teachers: Vec<(f64, f64, f64)> = teacher
        .rows
        .iter()
        .map(|r| (r[tx], r[ty], r[tg]))
        .collect();
    let (body, size) = svg::particle_trace_figure(&particles, &teachers);
    write_svg(cfg, svg_name, &body, size)?;
    Ok(())
}
