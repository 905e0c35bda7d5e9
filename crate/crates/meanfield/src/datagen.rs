//! Synthetic data: planted two-layer teachers, planar cluster grids,
//! and CSV import/export for datasets.

use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::Dataset;
use crate::seeding;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use std::io::{BufRead, Write};

/// Generative sampler handed to SGD and the experiment drivers.
pub trait DataDistribution: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Dataset>;
}

/// Law of the planted teacher weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightLaw {
    /// Input weights uniform on the unit sphere, output weights +-1.
    #[default]
    SphereRademacher,
    /// All weights standard normal.
    Gaussian,
}

/// Ground-truth network y = sum_j v_j relu(u_j . x) (no 1/m scaling, so
/// the target does not shrink as units are added).
#[derive(Debug, Clone)]
pub struct TeacherNetwork {
    /// One input-weight row per hidden unit.
    u: Vec<Vec<f64>>,
    v: Vec<f64>,
    dim: usize,
}

impl TeacherNetwork {
    pub fn new(input_weights: Vec<Vec<f64>>, output_weights: Vec<f64>) -> Result<Self> {
        if input_weights.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if input_weights.len() != output_weights.len() {
            return Err(Error::DimensionMismatch {
                expected: input_weights.len(),
                got: output_weights.len(),
            });
        }
        let dim = input_weights[0].len();
        if dim == 0 || input_weights.iter().any(|u| u.len() != dim) {
            return Err(Error::InvalidParameter(
                "teacher input weights must share a positive dimension".into(),
            ));
        }
        Ok(TeacherNetwork {
            u: input_weights,
            v: output_weights,
            dim,
        })
    }

    pub fn units(&self) -> usize {
        self.v.len()
    }

    pub fn unit_input(&self, j: usize) -> &[f64] {
        &self.u[j]
    }

    pub fn unit_output(&self, j: usize) -> f64 {
        self.v[j]
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self
            .u
            .iter()
            .zip(&self.v)
            .map(|(u, &v)| v * linalg::dot(u, x).max(0.0))
            .sum())
    }
}

/// Draws a teacher with `units` hidden units on `dim` inputs.
pub fn make_teacher(dim: usize, units: usize, seed: u64, law: WeightLaw) -> TeacherNetwork {
    assert!(dim >= 1 && units >= 1, "teacher needs dim >= 1, units >= 1");
    let mut rng = seeding::stream(seed, 0);
    let mut u = Vec::with_capacity(units);
    let mut v = Vec::with_capacity(units);
    for _ in 0..units {
        match law {
            WeightLaw::SphereRademacher => {
                u.push(seeding::unit_sphere(dim, &mut rng));
                v.push(seeding::rademacher(&mut rng));
            }
            WeightLaw::Gaussian => {
                u.push((0..dim).map(|_| rng.sample(StandardNormal)).collect());
                v.push(rng.sample(StandardNormal));
            }
        }
    }
    TeacherNetwork { u, v, dim }
}

/// n noiseless samples with x ~ N(0, I_dim) and y the teacher output.
pub fn sample_teacher(
    teacher: &TeacherNetwork,
    n: usize,
    rng: &mut (impl Rng + ?Sized),
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut xs = Vec::with_capacity(n * teacher.dim);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let start = xs.len();
        for _ in 0..teacher.dim {
            xs.push(rng.sample(StandardNormal));
        }
        ys.push(teacher.value(&xs[start..])?);
    }
    Dataset::from_flat(xs, ys, teacher.dim)
}

impl DataDistribution for TeacherNetwork {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Dataset> {
        sample_teacher(self, n, rng)
    }
}

/// k x k grid of disk clusters in the first two coordinates, each
/// assigned a fixed +-1 label at construction. With radius
/// r = 1/(3k - 1) and center spacing 3r the disks tile [-1/2, 1/2]^2
/// flush with the boundary and stay 2r apart. Remaining coordinates are
/// uniform on [-1/2, 1/2].
#[derive(Debug, Clone)]
pub struct ClusterDistribution {
    k: usize,
    dim: usize,
    radius: f64,
    centers: Vec<(f64, f64)>,
    labels: Vec<f64>,
}

impl ClusterDistribution {
    pub fn new(k: usize, dim: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("need k >= 1 clusters per axis".into()));
        }
        if dim < 2 {
            return Err(Error::InvalidParameter(
                "cluster distribution needs dim >= 2".into(),
            ));
        }
        let radius = 1.0 / (3.0 * k as f64 - 1.0);
        let coord = |i: usize| -0.5 + radius + 3.0 * radius * i as f64;
        let mut centers = Vec::with_capacity(k * k);
        for iy in 0..k {
            for ix in 0..k {
                centers.push((coord(ix), coord(iy)));
            }
        }
        let mut rng = seeding::stream(seed, 0);
        let labels = (0..k * k).map(|_| seeding::rademacher(&mut rng)).collect();
        Ok(ClusterDistribution {
            k,
            dim,
            radius,
            centers,
            labels,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn centers(&self) -> &[(f64, f64)] {
        &self.centers
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Label of the cluster whose center is nearest to x (planar part).
    pub fn label_at(&self, x: &[f64]) -> Result<f64> {
        if x.len() < 2 {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let nearest = self
            .centers
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                let da = (x[0] - a.0).hypot(x[1] - a.1);
                let db = (x[0] - b.0).hypot(x[1] - b.1);
                da.total_cmp(&db)
            })
            .map(|(i, _)| i)
            .expect("k >= 1");
        Ok(self.labels[nearest])
    }
}

impl DataDistribution for ClusterDistribution {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut xs = Vec::with_capacity(n * self.dim);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let c = rng.random_range(0..self.centers.len());
            let (cx, cy) = self.centers[c];
            // sqrt law makes the disk sample uniform in area
            let rho = self.radius * rng.random::<f64>().sqrt();
            let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            xs.push(cx + rho * phi.cos());
            xs.push(cy + rho * phi.sin());
            for _ in 2..self.dim {
                xs.push(rng.random_range(-0.5..0.5));
            }
            ys.push(self.labels[c]);
        }
        Dataset::from_flat(xs, ys, self.dim)
    }
}

/// Degenerate distribution over a fixed dataset. Sampling exactly `len`
/// points returns the dataset itself in order (so batch = n reproduces
/// full-batch descent); any other batch size draws i.i.d. indices.
#[derive(Debug, Clone)]
pub struct FixedDataset {
    ds: Dataset,
}

impl FixedDataset {
    pub fn new(ds: Dataset) -> Self {
        FixedDataset { ds }
    }
}

impl DataDistribution for FixedDataset {
    fn dim(&self) -> usize {
        self.ds.dim()
    }

    fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if n == self.ds.len() {
            return Ok(self.ds.clone());
        }
        let mut xs = Vec::with_capacity(n * self.ds.dim());
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let i = rng.random_range(0..self.ds.len());
            xs.extend_from_slice(self.ds.x(i));
            ys.push(self.ds.y(i));
        }
        Dataset::from_flat(xs, ys, self.ds.dim())
    }
}

/// Writes `ds` as CSV with header `x_1,...,x_d,y`, preceded by one
/// `# `-prefixed line per entry of `comments`. Floats are printed with
/// 17 significant digits so a read-back is bit exact.
pub fn write_csv<W: Write>(ds: &Dataset, out: &mut W, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut header: Vec<String> = (1..=ds.dim()).map(|i| format!("x_{i}")).collect();
    header.push("y".into());
    writeln!(out, "{}", header.join(","))?;
    let mut row = String::new();
    for i in 0..ds.len() {
        row.clear();
        for v in ds.x(i) {
            row.push_str(&format!("{v:.16e}"));
            row.push(',');
        }
        row.push_str(&format!("{:.16e}", ds.y(i)));
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// Reads a dataset written by [`write_csv`]; `#` lines are skipped.
pub fn read_csv<R: BufRead>(input: R) -> Result<Dataset> {
    let mut dim: Option<usize> = None;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        match dim {
            None => {
                if fields.len() < 2 || fields[fields.len() - 1] != "y" {
                    return Err(Error::Parse(format!(
                        "line {}: expected header x_1,...,x_d,y",
                        lineno + 1
                    )));
                }
                let d = fields.len() - 1;
                for (i, f) in fields[..d].iter().enumerate() {
                    if *f != format!("x_{}", i + 1) {
                        return Err(Error::Parse(format!(
                            "line {}: bad header column {f:?}",
                            lineno + 1
                        )));
                    }
                }
                dim = Some(d);
            }
            Some(d) => {
                if fields.len() != d + 1 {
                    return Err(Error::Parse(format!(
                        "line {}: expected {} fields, got {}",
                        lineno + 1,
                        d + 1,
                        fields.len()
                    )));
                }
                for (i, f) in fields.iter().enumerate() {
                    let v: f64 = f.trim().parse().map_err(|_| {
                        Error::Parse(format!("line {}: bad float {f:?}", lineno + 1))
                    })?;
                    if i < d {
                        xs.push(v);
                    } else {
                        ys.push(v);
                    }
                }
            }
        }
    }
    let dim = dim.ok_or_else(|| Error::Parse("no header line".into()))?;
    Dataset::from_flat(xs, ys, dim)
}
