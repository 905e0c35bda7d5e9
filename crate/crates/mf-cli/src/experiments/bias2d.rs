//! Planar decision-boundary comparison: the same network and data
//! trained two ways (both layers vs output layer only), boundaries
//! extracted on a grid, and their shapes contrasted by the turning-angle
//! variance statistic.

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{fnum, out_path, write_csv, write_json, write_svg, CsvData};
use crate::svg;
use meanfield::datagen::{ClusterDistribution, DataDistribution};
use meanfield::flow::init_ensemble;
use meanfield::margin::{total_length, turning_angle_variance, BoundaryGrid};
use meanfield::{seeding, Activation, Dataset, Ensemble};
use serde_json::json;

use super::{
    par_map_reps, train_both_layers, train_output_only, with_bias_coordinate, TrainedNet,
    BIAS_INPUT, STREAM_DATA, STREAM_INIT,
};

/// How many fresh training sets to try when one is not separated by
/// both training routes. Each attempt advances the data stream slot.
pub const MAX_SAMPLE_ATTEMPTS: u64 = 5;

/// Route indices used in the CSV `route` column.
pub const ROUTE_BOTH: usize = 0;
pub const ROUTE_OUTPUT: usize = 1;

struct RouteResult {
    net: TrainedNet,
    grid: BoundaryGrid,
    variance: f64,
    length: f64,
}

struct RepResult {
    rep_seed: u64,
    attempts: u64,
    ds: Dataset,
    routes: [RouteResult; 2],
}

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let reps = par_map_reps(cfg.seed, cfg.repetitions, |_rep, rep_seed| {
        run_rep(cfg, rep_seed)
    })?;

    let route_names = vec![
        ("route_0".to_string(), "both-layers".to_string()),
        ("route_1".to_string(), "output-layer".to_string()),
    ];
    let mut contrast_rows = Vec::new();
    let mut summary_reps = Vec::new();
    for (rep, r) in reps.iter().enumerate() {
        let mut extra = route_names.clone();
        extra.push(("rep_seed".into(), r.rep_seed.to_string()));
        extra.push(("sample_attempts".into(), r.attempts.to_string()));

        let train_rows: Vec<Vec<String>> = (0..r.ds.len())
            .map(|i| {
                let x = r.ds.x(i);
                vec![fnum(x[0]), fnum(x[1]), fnum(r.ds.y(i))]
            })
            .collect();
        write_csv(
            cfg,
            &format!("train_rep{rep}.csv"),
            &extra,
            &["x_1", "x_2", "y"],
            &train_rows,
        )?;

        let mut grid_rows = Vec::new();
        let mut line_rows = Vec::new();
        for (route, rr) in r.routes.iter().enumerate() {
            let res = rr.grid.resolution();
            for iy in 0..=res {
                for ix in 0..=res {
                    let (x, y) = rr.grid.node(ix, iy);
                    grid_rows.push(vec![
                        route.to_string(),
                        ix.to_string(),
                        iy.to_string(),
                        fnum(x),
                        fnum(y),
                        fnum(rr.grid.values()[iy][ix]),
                    ]);
                }
            }
            for (pi, poly) in rr.grid.polylines().iter().enumerate() {
                for (vi, &(x, y)) in poly.iter().enumerate() {
                    line_rows.push(vec![
                        route.to_string(),
                        pi.to_string(),
                        vi.to_string(),
                        fnum(x),
                        fnum(y),
                    ]);
                }
            }
        }
        write_csv(
            cfg,
            &format!("grid_rep{rep}.csv"),
            &extra,
            &["route", "ix", "iy", "x", "y", "value"],
            &grid_rows,
        )?;
        write_csv(
            cfg,
            &format!("boundary_rep{rep}.csv"),
            &extra,
            &["route", "polyline", "vertex", "x", "y"],
            &line_rows,
        )?;
        render_svg(cfg, rep)?;

        for (route, rr) in r.routes.iter().enumerate() {
            contrast_rows.push(vec![
                rep.to_string(),
                route.to_string(),
                fnum(rr.net.train_error),
                fnum(rr.net.final_risk),
                fnum(rr.variance),
                fnum(rr.length),
                rr.grid.polylines().len().to_string(),
                r.attempts.to_string(),
            ]);
        }

        let contrast_holds = r.routes[ROUTE_BOTH].variance > r.routes[ROUTE_OUTPUT].variance;
        summary_reps.push(json!({
            "repetition": rep,
            "rep_seed": r.rep_seed,
            "sample_attempts": r.attempts,
            "separated": r.routes.iter().all(|rr| rr.net.train_error == 0.0),
            "variance_both_layers": r.routes[ROUTE_BOTH].variance,
            "variance_output_layer": r.routes[ROUTE_OUTPUT].variance,
            "both_layers_rougher": contrast_holds,
        }));
    }

    write_csv(
        cfg,
        "contrast.csv",
        &route_names,
        &[
            "repetition",
            "route",
            "train_error",
            "final_risk",
            "turning_angle_variance",
            "total_length",
            "polylines",
            "sample_attempts",
        ],
        &contrast_rows,
    )?;

    let holds = summary_reps
        .iter()
        .filter(|r| r["both_layers_rougher"] == json!(true))
        .count();
    let mut body = serde_json::Map::new();
    body.insert("repetitions".into(), json!(summary_reps));
    body.insert("both_layers_rougher_count".into(), json!(holds));
    write_json(cfg, "summary.json", body)?;
    Ok(())
}

fn run_rep(cfg: &RunConfig, rep_seed: u64) -> CliResult<RepResult> {
    let dist = ClusterDistribution::new(cfg.k, 2, rep_seed)?;
    // d + 1 input weights: the extra one multiplies the constant
    // coordinate and acts as the unit's offset
    let mut init_rng = seeding::stream(rep_seed, STREAM_INIT);
    let e0 = init_ensemble(cfg.m, 3, &mut init_rng);

    let mut attempts = 0u64;
    let (ds, both, output) = loop {
        let mut data_rng = seeding::stream(rep_seed, STREAM_DATA + attempts);
        let ds = dist.sample(cfg.n, &mut data_rng)?;
        let train = with_bias_coordinate(&ds)?;
        let both = train_both_layers(&e0, &train, cfg.gamma, cfg.iterations)?;
        let output = train_output_only(&e0, &train, cfg.gamma, cfg.iterations)?;
        attempts += 1;
        let separated = both.train_error == 0.0 && output.train_error == 0.0;
        if separated || attempts >= MAX_SAMPLE_ATTEMPTS {
            if !separated {
                eprintln!(
                    "warning: training set not separated after {attempts} draws \
                     (train errors {:.3}/{:.3}); keeping last draw",
                    both.train_error, output.train_error
                );
            }
            break (ds, both, output);
        }
        eprintln!("note: training set not separated, resampling (attempt {attempts})");
    };

    let build = |net: TrainedNet| -> CliResult<RouteResult> {
        let grid = planar_boundary(&net.ensemble, cfg.resolution)?;
        let variance = turning_angle_variance(grid.polylines());
        let length = total_length(grid.polylines());
        Ok(RouteResult {
            net,
            grid,
            variance,
            length,
        })
    };
    Ok(RepResult {
        rep_seed,
        attempts,
        ds,
        routes: [build(both)?, build(output)?],
    })
}

/// Zero level of the augmented net's predictor over the data plane.
fn planar_boundary(e: &Ensemble, resolution: usize) -> CliResult<BoundaryGrid> {
    Ok(BoundaryGrid::evaluate(-0.5, 0.5, resolution, |x, y| {
        e.predict(&[x, y, BIAS_INPUT], Activation::Relu)
            .expect("augmented planar input")
    })?)
}

/// Overlay figure for one repetition, rebuilt from the emitted CSVs.
fn render_svg(cfg: &RunConfig, rep: usize) -> CliResult<()> {
    let train = CsvData::read(&out_path(cfg, &format!("train_rep{rep}.csv")))?;
    let (xi, yi, li) = (train.col("x_1")?, train.col("x_2")?, train.col("y")?);
    let points: Vec<(f64, f64, f64)> = train
        .rows
        .iter()
        .map(|r| (r[xi], r[yi], r[li]))
        .collect();

    let lines = CsvData::read(&out_path(cfg, &format!("boundary_rep{rep}.csv")))?;
    let (ri, pi, xi, yi) = (
        lines.col("route")?,
        lines.col("polyline")?,
        lines.col("x")?,
        lines.col("y")?,
    );
    let mut per_route: [Vec<Vec<(f64, f64)>>; 2] = [Vec::new(), Vec::new()];
    for row in &lines.rows {
        let route = row[ri] as usize;
        let poly = row[pi] as usize;
        let polys = &mut per_route[route];
        if polys.len() <= poly {
            polys.resize(poly + 1, Vec::new());
        }
        polys[poly].push((row[xi], row[yi]));
    }
    let (body, size) =
        svg::boundary_overlay_figure(&points, &per_route[ROUTE_BOTH], &per_route[ROUTE_OUTPUT]);
    write_svg(cfg, &format!("boundary_rep{rep}.svg"), &body, size)?;
    Ok(())
}
