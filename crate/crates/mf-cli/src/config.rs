//! Experiment configuration: per-experiment defaults at two scales, a
//! flat TOML file on top, CLI flags on top of that.

use crate::error::{CliError, CliResult};
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};

/// Fresh test samples used for test-error estimates.
pub const TEST_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    ParticleTrace,
    TeacherStudentSweep,
    ImplicitBias2d,
    ImplicitBiasHighdim,
    Certificate,
    Equivalence,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::ParticleTrace => "particle-trace",
            Experiment::TeacherStudentSweep => "teacher-student-sweep",
            Experiment::ImplicitBias2d => "implicit-bias-2d",
            Experiment::ImplicitBiasHighdim => "implicit-bias-highdim",
            Experiment::Certificate => "certificate",
            Experiment::Equivalence => "equivalence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preset {
    /// Minutes on a laptop; trends only.
    #[default]
    Desk,
    /// Full-scale figures; hours for the high-dimensional sweeps.
    Paper,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(CliError::Config(format!(
                "unknown preset '{other}' (expected desk or paper)"
            ))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Optional overrides read from the TOML config file. Unknown keys are
/// rejected so typos surface as config errors instead of silently
/// running defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub repetitions: Option<usize>,
    pub output_dir: Option<String>,
    pub m: Option<usize>,
    pub m0: Option<usize>,
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub gamma: Option<f64>,
    pub iterations: Option<usize>,
    pub batch: Option<usize>,
    pub k: Option<usize>,
    pub m_grid: Option<Vec<usize>>,
    pub n_grid: Option<Vec<usize>>,
    pub d_grid: Option<Vec<usize>>,
    pub resolution: Option<usize>,
    pub n_probes: Option<usize>,
    pub record_every: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved parameters of one run. Every output file echoes all
/// of these in its header.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub preset: Preset,
    pub seed: u64,
    pub repetitions: usize,
    pub output_dir: PathBuf,
    /// Student particle count (single-m experiments).
    pub m: usize,
    /// Teacher hidden units.
    pub m0: usize,
    /// Input dimension.
    pub d: usize,
    /// Training-set size (fixed-dataset experiments).
    pub n: usize,
    /// Step size.
    pub gamma: f64,
    /// Gradient steps.
    pub iterations: usize,
    /// SGD minibatch size.
    pub batch: usize,
    /// Cluster grid parameter (k^2 disks).
    pub k: usize,
    pub m_grid: Vec<usize>,
    pub n_grid: Vec<usize>,
    pub d_grid: Vec<usize>,
    /// Boundary-grid cells per axis.
    pub resolution: usize,
    /// Probe count: certificate sphere directions, or side-by-side
    /// predictor evaluation points for the equivalence check.
    pub n_probes: usize,
    /// Snapshot stride.
    pub record_every: usize,
}

/// Full-scale and desk-scale defaults per experiment, calibrated so
/// runs converge at their scale.
pub fn defaults(experiment: Experiment, preset: Preset) -> RunConfig {
    let mut cfg = RunConfig {
        experiment,
        preset,
        seed: 0,
        repetitions: 1,
        output_dir: PathBuf::from(format!("out/{}", experiment.name())),
        m: 100,
        m0: 4,
        d: 2,
        n: 256,
        gamma: 0.01,
        iterations: 1000,
        batch: 100,
        k: 3,
        m_grid: Vec::new(),
        n_grid: Vec::new(),
        d_grid: Vec::new(),
        resolution: 128,
        n_probes: 256,
        record_every: 1000,
    };
    let paper = matches!(preset, Preset::Paper);
    match experiment {
        Experiment::ParticleTrace => {
            cfg.d = 2;
            cfg.m0 = 4;
            if paper {
                cfg.m_grid = vec![5, 20, 100, 1000];
                cfg.gamma = 0.005;
                cfg.iterations = 30_000;
                cfg.batch = 100;
                cfg.record_every = 3_750;
            } else {
                cfg.m_grid = vec![5, 20, 100];
                cfg.gamma = 0.01;
                cfg.iterations = 8_000;
                cfg.batch = 50;
                cfg.record_every = 1_000;
            }
        }
        Experiment::TeacherStudentSweep => {
            if paper {
                cfg.d = 100;
                cfg.m0 = 10;
                cfg.gamma = 0.005;
                cfg.iterations = 10_000;
                cfg.batch = 100;
                cfg.repetitions = 30;
                cfg.m_grid = vec![5, 10, 20, 50, 100, 200];
                cfg.record_every = 10_000;
            } else {
                cfg.d = 10;
                cfg.m0 = 4;
                cfg.gamma = 0.01;
                cfg.iterations = 16_000;
                cfg.batch = 50;
                cfg.repetitions = 10;
                cfg.m_grid = vec![4, 8, 16, 32, 64];
                cfg.record_every = 16_000;
            }
        }
        Experiment::ImplicitBias2d => {
            cfg.d = 2;
            cfg.k = 3;
            cfg.repetitions = 4;
            if paper {
                cfg.m = 1000;
                cfg.n = 256;
                cfg.gamma = 0.05;
                cfg.iterations = 20_000;
                cfg.resolution = 256;
                cfg.record_every = 2_500;
            } else {
                cfg.m = 1000;
                cfg.n = 128;
                cfg.gamma = 0.05;
                cfg.iterations = 6_000;
                cfg.resolution = 256;
                cfg.record_every = 750;
            }
        }
        Experiment::ImplicitBiasHighdim => {
            cfg.k = 3;
            if paper {
                cfg.m = 1000;
                cfg.repetitions = 20;
                cfg.d = 15;
                cfg.n = 256;
                cfg.n_grid = vec![16, 32, 64, 128, 256, 512];
                cfg.d_grid = vec![2, 5, 10, 15, 20, 25];
                cfg.gamma = 0.05;
                cfg.iterations = 3_000;
            } else {
                cfg.m = 100;
                cfg.repetitions = 5;
                cfg.d = 15;
                cfg.n = 128;
                cfg.n_grid = vec![32, 64, 128];
                cfg.d_grid = vec![5, 10, 15];
                cfg.gamma = 0.05;
                cfg.iterations = 1_200;
            }
            cfg.record_every = cfg.iterations;
        }
        Experiment::Certificate => {
            cfg.d = 2;
            cfg.m0 = 4;
            cfg.m_grid = vec![5, 100];
            cfg.n = 24;
            cfg.gamma = 0.05;
            cfg.n_probes = 256;
            if paper {
                cfg.iterations = 400_000;
            } else {
                cfg.iterations = 200_000;
            }
            cfg.record_every = cfg.iterations;
        }
        Experiment::Equivalence => {
            cfg.d = 2;
            cfg.m0 = 4;
            cfg.m = 10;
            cfg.n = 8;
            cfg.gamma = 1e-3;
            // horizon T = gamma * iterations = 1
            cfg.iterations = 1_000;
            cfg.n_probes = 16;
            cfg.record_every = cfg.iterations;
        }
    }
    cfg
}

impl RunConfig {
    /// Defaults for `preset` overlaid with the file values.
    pub fn resolve(
        experiment: Experiment,
        preset: Preset,
        file: &FileConfig,
    ) -> CliResult<Self> {
        let mut cfg = defaults(experiment, preset);
        if let Some(v) = file.seed {
            cfg.seed = v;
        }
        if let Some(v) = file.repetitions {
            cfg.repetitions = v;
        }
        if let Some(ref v) = file.output_dir {
            cfg.output_dir = PathBuf::from(v);
        }
        if let Some(v) = file.m {
            cfg.m = v;
        }
        if let Some(v) = file.m0 {
            cfg.m0 = v;
        }
        if let Some(v) = file.d {
            cfg.d = v;
        }
        if let Some(v) = file.n {
            cfg.n = v;
        }
        if let Some(v) = file.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = file.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = file.batch {
            cfg.batch = v;
        }
        if let Some(v) = file.k {
            cfg.k = v;
        }
        if let Some(ref v) = file.m_grid {
            cfg.m_grid = v.clone();
        }
        if let Some(ref v) = file.n_grid {
            cfg.n_grid = v.clone();
        }
        if let Some(ref v) = file.d_grid {
            cfg.d_grid = v.clone();
        }
        if let Some(v) = file.resolution {
            cfg.resolution = v;
        }
        if let Some(v) = file.n_probes {
            cfg.n_probes = v;
        }
        if let Some(v) = file.record_every {
            cfg.record_every = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let positive = [
            ("repetitions", self.repetitions),
            ("m", self.m),
            ("m0", self.m0),
            ("d", self.d),
            ("n", self.n),
            ("iterations", self.iterations),
            ("batch", self.batch),
            ("k", self.k),
            ("resolution", self.resolution),
            ("n_probes", self.n_probes),
            ("record_every", self.record_every),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(CliError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(CliError::Config("gamma must be positive and finite".into()));
        }
        for (name, grid) in [
            ("m_grid", &self.m_grid),
            ("n_grid", &self.n_grid),
            ("d_grid", &self.d_grid),
        ] {
            if grid.iter().any(|&v| v == 0) {
                return Err(CliError::Config(format!("{name} entries must be positive")));
            }
        }
        match self.experiment {
            Experiment::ParticleTrace | Experiment::ImplicitBias2d => {
                if self.d != 2 {
                    return Err(CliError::Config(format!(
                        "{} requires d = 2, got {}",
                        self.experiment.name(),
                        self.d
                    )));
                }
            }
            Experiment::TeacherStudentSweep | Experiment::Certificate => {
                if self.m_grid.is_empty() {
                    return Err(CliError::Config("m_grid must be nonempty".into()));
                }
            }
            Experiment::ImplicitBiasHighdim => {
                if self.n_grid.is_empty() && self.d_grid.is_empty() {
                    return Err(CliError::Config(
                        "need at least one of n_grid, d_grid".into(),
                    ));
                }
                // cluster data lives in the first two coordinates
                if self.d < 2 || self.d_grid.iter().any(|&v| v < 2) {
                    return Err(CliError::Config(
                        "cluster data needs d >= 2 (d and d_grid entries)".into(),
                    ));
                }
            }
            Experiment::Equivalence => {}
        }
        Ok(())
    }

    /// Header block entries: the full resolved configuration.
    pub fn header_pairs(&self) -> Vec<(String, String)> {
        let grid = |g: &[usize]| {
            g.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        vec![
            ("experiment".into(), self.experiment.name().into()),
            ("preset".into(), self.preset.name().into()),
            ("seed".into(), self.seed.to_string()),
            ("repetitions".into(), self.repetitions.to_string()),
            ("output_dir".into(), self.output_dir.display().to_string()),
            ("m".into(), self.m.to_string()),
            ("m0".into(), self.m0.to_string()),
            ("d".into(), self.d.to_string()),
            ("n".into(), self.n.to_string()),
            ("gamma".into(), format!("{:e}", self.gamma)),
            ("iterations".into(), self.iterations.to_string()),
            ("batch".into(), self.batch.to_string()),
            ("k".into(), self.k.to_string()),
            ("m_grid".into(), grid(&self.m_grid)),
            ("n_grid".into(), grid(&self.n_grid)),
            ("d_grid".into(), grid(&self.d_grid)),
            ("resolution".into(), self.resolution.to_string()),
            ("n_probes".into(), self.n_probes.to_string()),
            ("record_every".into(), self.record_every.to_string()),
        ]
    }

    /// The same header block as a JSON map for report files.
    pub fn as_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (k, v) in self.header_pairs() {
            map.insert(k, serde_json::Value::String(v));
        }
        serde_json::Value::Object(map)
    }
}
