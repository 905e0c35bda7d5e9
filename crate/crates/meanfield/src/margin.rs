//! Margin statistics and decision-boundary geometry.
//!
//! The boundary extractor runs marching squares on a sign grid and
//! chains the per-cell segments into polylines; the turning-angle
//! variance of those polylines separates kinked piecewise-linear
//! boundaries from smooth ones at a glance.

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::linalg;
use crate::loss::{predictions, Dataset};
use crate::model::{Activation, Ensemble};
use rayon::prelude::*;
use std::collections::HashMap;

/// How network outputs are rescaled before taking the minimum margin;
/// recorded alongside every trace so plots are self-describing.
pub const SCALE_DEFINITION: &str = "mean squared particle norm (1/m) sum_j |w_j|^2";

/// min_i y_i h(x_i) divided by the ensemble's weight scale. Both the
/// numerator and the scale grow quadratically when particles are
/// multiplied by a constant, so the ratio only sees the configuration's
/// shape.
pub fn normalized_margin(e: &Ensemble, ds: &Dataset, act: Activation) -> Result<f64> {
    let preds = predictions(e, ds, act)?;
    margin_of(&preds, ds.labels(), e.weight_scale())
}

/// Margin from precomputed predictions; `scale` must be positive.
pub fn margin_of(preds: &[f64], ys: &[f64], scale: f64) -> Result<f64> {
    if preds.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: ys.len(),
            got: preds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(scale > 0.0) {
        return Err(Error::ZeroScale);
    }
    Ok(preds
        .iter()
        .zip(ys)
        .map(|(&p, &y)| y * p)
        .fold(f64::INFINITY, f64::min)
        / scale)
}

/// Normalized margin sampled along a recorded trajectory.
#[derive(Debug, Clone)]
pub struct MarginTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub scale_definition: &'static str,
}

/// Evaluates the normalized margin at every snapshot of a trajectory.
pub fn margin_trace(traj: &Trajectory, ds: &Dataset, act: Activation) -> Result<MarginTrace> {
    let mut times = Vec::with_capacity(traj.snapshots.len());
    let mut values = Vec::with_capacity(traj.snapshots.len());
    for snap in &traj.snapshots {
        times.push(snap.time);
        values.push(normalized_margin(&snap.ensemble, ds, act)?);
    }
    Ok(MarginTrace {
        times,
        values,
        scale_definition: SCALE_DEFINITION,
    })
}

/// 1 - cosine similarity between u and v: 0 for aligned vectors, 1 for
/// orthogonal, 2 for opposite. Invariant under positive scaling of
/// either argument.
pub fn direction_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let uu = linalg::normalized(u)?;
    let vv = linalg::normalized(v)?;
    Ok(1.0 - linalg::dot(&uu, &vv))
}

/// Fraction of points with y f(x) <= 0.
pub fn classification_error(preds: &[f64], ys: &[f64]) -> Result<f64> {
    if preds.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: ys.len(),
            got: preds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let wrong = preds
        .iter()
        .zip(ys)
        .filter(|(&p, &y)| y * p <= 0.0)
        .count();
    Ok(wrong as f64 / preds.len() as f64)
}

/// Function values on a square lattice together with the chained zero
/// level set. `resolution` counts cells per axis; nodes are
/// (resolution + 1)^2.
#[derive(Debug, Clone)]
pub struct BoundaryGrid {
    lo: f64,
    hi: f64,
    resolution: usize,
    /// Node rows, outer index iy, inner ix.
    values: Vec<Vec<f64>>,
    polylines: Vec<Vec<(f64, f64)>>,
}

/// Coarsest lattice accepted for boundary extraction; below this the
/// turning-angle statistic is dominated by discretization.
pub const MIN_RESOLUTION: usize = 64;

impl BoundaryGrid {
    /// Evaluates f on the lattice and extracts its zero level set.
    pub fn evaluate<F>(lo: f64, hi: f64, resolution: usize, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        if !(hi > lo) {
            return Err(Error::InvalidParameter("need hi > lo".into()));
        }
        if resolution < MIN_RESOLUTION {
            return Err(Error::InvalidParameter(format!(
                "resolution {resolution} below minimum {MIN_RESOLUTION}"
            )));
        }
        let h = (hi - lo) / resolution as f64;
        let coord = |i: usize| lo + i as f64 * h;
        let values: Vec<Vec<f64>> = (0..=resolution)
            .into_par_iter()
            .map(|iy| (0..=resolution).map(|ix| f(coord(ix), coord(iy))).collect())
            .collect();
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite value on the evaluation grid".into(),
            ));
        }

        let mut segments: Vec<Segment> = Vec::new();
        for iy in 0..resolution {
            for ix in 0..resolution {
                cell_segments(&values, ix, iy, coord, &f, &mut segments);
            }
        }
        let polylines = chain_segments(segments);
        Ok(BoundaryGrid {
            lo,
            hi,
            resolution,
            values,
            polylines,
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Cells per axis.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Node value rows, outer index iy.
    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Position of node (ix, iy).
    pub fn node(&self, ix: usize, iy: usize) -> (f64, f64) {
        let h = (self.hi - self.lo) / self.resolution as f64;
        (self.lo + ix as f64 * h, self.lo + iy as f64 * h)
    }

    /// Zero level set as chained polylines, each a list of consecutive
    /// boundary points (first == last for closed loops).
    pub fn polylines(&self) -> &[Vec<(f64, f64)>] {
        &self.polylines
    }
}

/// Decision boundary of a planar ensemble on [-1/2, 1/2]^2, the square
/// the cluster sampler fills.
pub fn extract_boundary(e: &Ensemble, act: Activation, resolution: usize) -> Result<BoundaryGrid> {
    extract_boundary_in(e, act, resolution, -0.5, 0.5)
}

/// Decision boundary on a caller-chosen square window.
pub fn extract_boundary_in(
    e: &Ensemble,
    act: Activation,
    resolution: usize,
    lo: f64,
    hi: f64,
) -> Result<BoundaryGrid> {
    if e.dim() != 2 {
        return Err(Error::NotPlanar(e.dim()));
    }
    BoundaryGrid::evaluate(lo, hi, resolution, |x, y| {
        e.predict(&[x, y], act).expect("planar input")
    })
}

/// Edge of the node grid: (0, ix, iy) is the horizontal edge from node
/// (ix, iy) to (ix+1, iy); (1, ix, iy) the vertical one to (ix, iy+1).
type EdgeId = (u8, usize, usize);

struct Segment {
    a: EdgeId,
    b: EdgeId,
    pa: (f64, f64),
    pb: (f64, f64),
}

/// Emits the marching-squares segments of one cell. Crossings are
/// linearly interpolated; the two ambiguous diagonal cases are resolved
/// with the cell-center value.
fn cell_segments<F>(
    values: &[Vec<f64>],
    ix: usize,
    iy: usize,
    coord: impl Fn(usize) -> f64,
    f: &F,
    out: &mut Vec<Segment>,
) where
    F: Fn(f64, f64) -> f64,
{
    let v = [
        values[iy][ix],
        values[iy][ix + 1],
        values[iy + 1][ix + 1],
        values[iy + 1][ix],
    ];
    let inside = [v[0] > 0.0, v[1] > 0.0, v[2] > 0.0, v[3] > 0.0];
    if inside.iter().all(|&b| b) || inside.iter().all(|&b| !b) {
        return;
    }
    let (x0, x1) = (coord(ix), coord(ix + 1));
    let (y0, y1) = (coord(iy), coord(iy + 1));
    // cyclic corner order 00 -> 10 -> 11 -> 01, edges between neighbors
    let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
    let edge_ids: [EdgeId; 4] = [
        (0, ix, iy),
        (1, ix + 1, iy),
        (0, ix, iy + 1),
        (1, ix, iy),
    ];
    let mut crossings: Vec<(EdgeId, (f64, f64))> = Vec::with_capacity(4);
    for e in 0..4 {
        let ne = (e + 1) % 4;
        if inside[e] != inside[ne] {
            let t = v[e] / (v[e] - v[ne]);
            let p = (
                corners[e].0 + t * (corners[ne].0 - corners[e].0),
                corners[e].1 + t * (corners[ne].1 - corners[e].1),
            );
            crossings.push((edge_ids[e], p));
        }
    }
    match crossings.len() {
        2 => out.push(Segment {
            a: crossings[0].0,
            b: crossings[1].0,
            pa: crossings[0].1,
            pb: crossings[1].1,
        }),
        4 => {
            // both diagonals share a sign; the center decides which
            // pairs of crossings belong together
            let center = f((x0 + x1) / 2.0, (y0 + y1) / 2.0);
            let pairs: [(usize, usize); 2] = if (center > 0.0) == inside[0] {
                [(3, 0), (1, 2)]
            } else {
                [(0, 1), (2, 3)]
            };
            for (i, j) in pairs {
                out.push(Segment {
                    a: crossings[i].0,
                    b: crossings[j].0,
                    pa: crossings[i].1,
                    pb: crossings[j].1,
                });
            }
        }
        _ => {}
    }
}

/// Chains segments that share a grid edge into polylines. Every edge is
/// incident to at most two segments, so paths and loops are unambiguous.
fn chain_segments(segments: Vec<Segment>) -> Vec<Vec<(f64, f64)>> {
    let mut by_edge: HashMap<EdgeId, Vec<usize>> = HashMap::new();
    for (i, s) in segments.iter().enumerate() {
        by_edge.entry(s.a).or_default().push(i);
        by_edge.entry(s.b).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut points = vec![segments[start].pa, segments[start].pb];
        let mut head = segments[start].a;
        let mut tail = segments[start].b;
        // grow forward from the tail, then backward from the head
        loop {
            let Some(next) = by_edge
                .get(&tail)
                .and_then(|ids| ids.iter().find(|&&i| !used[i]))
                .copied()
            else {
                break;
            };
            used[next] = true;
            let (far_edge, far_pt) = if segments[next].a == tail {
                (segments[next].b, segments[next].pb)
            } else {
                (segments[next].a, segments[next].pa)
            };
            points.push(far_pt);
            tail = far_edge;
            if tail == head {
                break;
            }
        }
        if tail != head {
            loop {
                let Some(next) = by_edge
                    .get(&head)
                    .and_then(|ids| ids.iter().find(|&&i| !used[i]))
                    .copied()
                else {
                    break;
                };
                used[next] = true;
                let (far_edge, far_pt) = if segments[next].a == head {
                    (segments[next].b, segments[next].pb)
                } else {
                    (segments[next].a, segments[next].pa)
                };
                points.insert(0, far_pt);
                head = far_edge;
            }
        }
        polylines.push(points);
    }
    polylines
}

/// Population variance of the signed turning angles along the
/// polylines. Straight lines score near zero; kinks inflate the spread.
pub fn turning_angle_variance(polylines: &[Vec<(f64, f64)>]) -> f64 {
    let mut angles = Vec::new();
    for poly in polylines {
        let dirs: Vec<(f64, f64)> = poly
            .windows(2)
            .map(|w| (w[1].0 - w[0].0, w[1].1 - w[0].1))
            .filter(|d| d.0.hypot(d.1) > 1e-12)
            .collect();
        for pair in dirs.windows(2) {
            let (ax, ay) = pair[0];
            let (bx, by) = pair[1];
            angles.push((ax * by - ay * bx).atan2(ax * bx + ay * by));
        }
    }
    if angles.len() < 2 {
        return 0.0;
    }
    let n = angles.len() as f64;
    let mean = angles.iter().sum::<f64>() / n;
    angles.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n
}

/// Total arc length of the polylines.
pub fn total_length(polylines: &[Vec<(f64, f64)>]) -> f64 {
    polylines
        .iter()
        .flat_map(|poly| {
            poly.windows(2)
                .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Particle;

    fn level_set<F: Fn(f64, f64) -> f64 + Sync>(
        lo: f64,
        hi: f64,
        res: usize,
        f: F,
    ) -> Vec<Vec<(f64, f64)>> {
        BoundaryGrid::evaluate(lo, hi, res, f)
            .unwrap()
            .polylines()
            .to_vec()
    }

    #[test]
    fn direction_distance_reference_values() {
        assert!(direction_distance(&[2.0, 0.0], &[5.0, 0.0]).unwrap() < 1e-15);
        let orth = direction_distance(&[1.0, 0.0], &[0.0, 3.0]).unwrap();
        assert!((orth - 1.0).abs() < 1e-15);
        let opp = direction_distance(&[1.0, 0.0], &[-2.0, 0.0]).unwrap();
        assert!((opp - 2.0).abs() < 1e-15);
        assert!(direction_distance(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn direction_distance_symmetric_and_scale_invariant() {
        let u = [0.3, -1.2, 0.7];
        let v = [-0.5, 0.4, 2.0];
        let dis = direction_distance(&u, &v).unwrap();
        let d_swapped = direction_distance(&v, &u).unwrap();
        assert!((dis - d_swapped).abs() < 1e-15);
        let scaled: Vec<f64> = u.iter().map(|x| 17.5 * x).collect();
        let d_scaled = direction_distance(&scaled, &v).unwrap();
        assert!((dis - d_scaled).abs() < 1e-12);
    }

    #[test]
    fn margin_hand_case_and_scaling_invariance() {
        let m = margin_of(&[2.0, -3.0], &[1.0, -1.0], 2.0).unwrap();
        assert!((m - 1.0).abs() < 1e-15);
        assert!(margin_of(&[1.0], &[1.0], 0.0).is_err());

        // w -> lambda w multiplies predictions and scale by lambda^2
        let e = Ensemble::new(vec![
            Particle::new(0.8, &[1.0, 0.5]),
            Particle::new(-0.3, &[-0.2, 1.1]),
        ])
        .unwrap();
        let scaled = Ensemble::new(
            e.particles()
                .iter()
                .map(|p| {
                    Particle::from_weights(p.w.iter().map(|c| 3.0 * c).collect())
                })
                .collect(),
        )
        .unwrap();
        let ds = Dataset::new(
            vec![vec![0.4, 0.1], vec![-0.3, 0.2], vec![0.1, -0.5]],
            vec![1.0, -1.0, 1.0],
        )
        .unwrap();
        let m1 = normalized_margin(&e, &ds, Activation::Relu).unwrap();
        let m2 = normalized_margin(&scaled, &ds, Activation::Relu).unwrap();
        assert!((m1 - m2).abs() < 1e-12, "{m1} vs {m2}");
    }

    #[test]
    fn misclassified_point_gives_negative_margin() {
        let e = Ensemble::new(vec![Particle::new(1.0, &[1.0, 0.0])]).unwrap();
        let ds = Dataset::new(vec![vec![1.0, 0.0]], vec![-1.0]).unwrap();
        assert!(normalized_margin(&e, &ds, Activation::Relu).unwrap() < 0.0);
    }

    #[test]
    fn classification_error_counts_sign_mismatches() {
        let err = classification_error(&[0.5, -0.2, 0.1, -0.4], &[1.0, 1.0, -1.0, -1.0]).unwrap();
        assert!((err - 0.5).abs() < 1e-15);
    }

    #[test]
    fn circle_boundary_is_one_accurate_loop() {
        let polys = level_set(-2.0, 2.0, 128, |x, y| 1.0 - x * x - y * y);
        assert_eq!(polys.len(), 1, "expected a single chained loop");
        let poly = &polys[0];
        assert!(poly.len() > 50);
        let (first, last) = (poly[0], *poly.last().unwrap());
        assert!((first.0 - last.0).hypot(first.1 - last.1) < 1e-9, "loop should close");
        for &(x, y) in poly {
            assert!((x.hypot(y) - 1.0).abs() < 0.01, "point off the circle: ({x}, {y})");
        }
        let len = total_length(&polys);
        assert!((len - 2.0 * std::f64::consts::PI).abs() < 0.05 * 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn straight_boundary_has_zero_turning_variance() {
        let polys = level_set(-1.0, 1.0, 64, |x, _| x - 0.3);
        assert_eq!(polys.len(), 1);
        for &(x, _) in &polys[0] {
            assert!((x - 0.3).abs() < 1e-12);
        }
        assert!(turning_angle_variance(&polys) < 1e-20);
    }

    #[test]
    fn corners_inflate_turning_variance() {
        let circle = level_set(-2.0, 2.0, 128, |x, y| 1.0 - x * x - y * y);
        let square = level_set(-2.0, 2.0, 128, |x, y| 1.0 - x.abs().max(y.abs()));
        let vc = turning_angle_variance(&circle);
        let vs = turning_angle_variance(&square);
        assert!(
            vs > 3.0 * vc,
            "square boundary should be kinkier: {vs} vs {vc}"
        );
    }

    #[test]
    fn hyperbola_levels_are_tracked() {
        let polys = level_set(-1.0, 1.0, 64, |x, y| x * y - 0.05);
        assert!(!polys.is_empty());
        for poly in &polys {
            for &(x, y) in poly {
                assert!((x * y - 0.05).abs() < 0.02, "({x}, {y})");
            }
        }
    }

    #[test]
    fn boundary_extraction_guards_inputs() {
        let e3 = Ensemble::new(vec![Particle::new(1.0, &[1.0, 0.0, 0.0])]).unwrap();
        assert!(matches!(
            extract_boundary(&e3, Activation::Relu, 64),
            Err(Error::NotPlanar(3))
        ));
        let e2 = Ensemble::new(vec![Particle::new(1.0, &[1.0, 0.0])]).unwrap();
        assert!(extract_boundary(&e2, Activation::Relu, 16).is_err());
    }

    #[test]
    fn relu_network_boundary_follows_the_kink() {
        // single neuron: sign boundary is the line x . b = 0
        let e = Ensemble::new(vec![
            Particle::new(1.0, &[1.0, 1.0]),
            Particle::new(-1.0, &[-1.0, -1.0]),
        ])
        .unwrap();
        let grid = extract_boundary_in(&e, Activation::Relu, 64, -1.0, 1.0).unwrap();
        let polys = grid.polylines();
        assert!(!polys.is_empty());
        for poly in polys {
            for &(x, y) in poly {
                assert!((x + y).abs() < 0.05, "expected boundary near x + y = 0, got ({x}, {y})");
            }
        }
    }

    #[test]
    fn sign_flip_preserves_boundary_geometry() {
        let e = Ensemble::new(vec![
            Particle::new(1.0, &[1.0, 0.2]),
            Particle::new(-0.7, &[-0.4, 1.0]),
            Particle::new(0.5, &[0.3, -1.0]),
        ])
        .unwrap();
        let flipped = Ensemble::new(
            e.particles()
                .iter()
                .map(|p| {
                    let mut w = p.w.clone();
                    w[0] = -w[0];
                    Particle::from_weights(w)
                })
                .collect(),
        )
        .unwrap();
        let a = extract_boundary(&e, Activation::Relu, 128).unwrap();
        let b = extract_boundary(&flipped, Activation::Relu, 128).unwrap();
        let la = total_length(a.polylines());
        let lb = total_length(b.polylines());
        assert!((la - lb).abs() < 1e-9 * la.max(1e-300), "{la} vs {lb}");
        let va = turning_angle_variance(a.polylines());
        let vb = turning_angle_variance(b.polylines());
        assert!((va - vb).abs() < 1e-12);
    }

    #[test]
    fn trained_cluster_margin_tail_is_nondecreasing() {
        use crate::datagen::{ClusterDistribution, DataDistribution};
        use crate::flow::{gd_step, init_ensemble, Snapshot, Trajectory};
        use crate::loss::{empirical_risk, Loss};
        use crate::seeding;

        for seed in 0..10u64 {
            let dist = ClusterDistribution::new(2, 2, seed).unwrap();
            let raw = dist
                .sample(24, &mut seeding::stream(seed, 1))
                .unwrap();
            // constant third coordinate so hidden units get affine
            // offsets; without it random cluster labels need not be
            // separable by a network of rays through the origin
            let xs: Vec<Vec<f64>> = raw
                .inputs()
                .map(|x| vec![x[0], x[1], 0.5])
                .collect();
            let ds = Dataset::new(xs, raw.labels().to_vec()).unwrap();

            let mut e = init_ensemble(40, 3, &mut seeding::stream(seed, 2));
            let gamma = 0.05;
            let mut snapshots = Vec::new();
            for k in 1..=4_000usize {
                let risk =
                    empirical_risk(&e, &ds, Loss::Logistic, Activation::Relu, None).unwrap();
                // risk-rescaled step keeps the parameter speed roughly
                // constant once the data is fit
                let step = gamma / risk.max(f64::MIN_POSITIVE);
                e = gd_step(&e, &ds, Loss::Logistic, Activation::Relu, step).unwrap();
                if k % 100 == 0 {
                    snapshots.push(Snapshot {
                        time: gamma * k as f64,
                        ensemble: e.clone(),
                        risk,
                    });
                }
            }
            let traj = Trajectory {
                snapshots,
                final_ensemble: e,
                diverged: false,
            };
            let trace = margin_trace(&traj, &ds, Activation::Relu).unwrap();
            let tail = &trace.values[trace.values.len() / 2..];
            assert!(
                tail[0] > 0.0,
                "seed {seed}: not separated by mid-training, margin {}",
                tail[0]
            );
            for pair in tail.windows(2) {
                assert!(
                    pair[1] >= pair[0] - 1e-9,
                    "seed {seed}: margin tail decreased, {} -> {}",
                    pair[0],
                    pair[1]
                );
            }
        }
    }
}
