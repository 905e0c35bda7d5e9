//! `mf`: particle gradient-flow experiments on two-layer networks.
//!
//! Each subcommand runs one experiment with desk-scale defaults (fast,
//! trend-level) or full-scale ones (`--preset paper`), optionally
//! overridden by a TOML config file and the seed/output flags. All
//! emitted files carry the fully resolved configuration in a header.

mod config;
mod error;
mod experiments;
mod output;
mod svg;

use clap::{Args, Parser, Subcommand};
use config::{Experiment, FileConfig, Preset, RunConfig};
use error::{CliError, CliResult};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "mf", about = "Particle gradient flows on two-layer networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// SGD particle traces against a planted planar teacher
    #[command(name = "particle-trace")]
    ParticleTrace(RunArgs),
    /// Success rate of teacher recovery as a function of student width
    #[command(name = "teacher-student-sweep")]
    TeacherStudentSweep(RunArgs),
    /// Decision-boundary shapes: both layers vs output layer, d = 2
    #[command(name = "implicit-bias-2d")]
    ImplicitBias2d(RunArgs),
    /// Test-error sweeps over sample count and dimension
    #[command(name = "implicit-bias-highdim")]
    ImplicitBiasHighdim(RunArgs),
    /// Global-optimality certificate on converged runs
    #[command(name = "certificate")]
    Certificate(RunArgs),
    /// Cartesian vs polar dynamics discrepancy report
    #[command(name = "equivalence")]
    Equivalence(RunArgs),
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Command::ParticleTrace(a) => (Experiment::ParticleTrace, a),
            Command::TeacherStudentSweep(a) => (Experiment::TeacherStudentSweep, a),
            Command::ImplicitBias2d(a) => (Experiment::ImplicitBias2d, a),
            Command::ImplicitBiasHighdim(a) => (Experiment::ImplicitBiasHighdim, a),
            Command::Certificate(a) => (Experiment::Certificate, a),
            Command::Equivalence(a) => (Experiment::Equivalence, a),
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML file with parameter overrides
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed (overrides the config file)
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Output directory (overrides the config file)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Parameter scale: desk (minutes) or paper (full-size runs)
    #[arg(long, default_value = "desk")]
    preset: String,

    /// Worker threads (default: all cores). Results are identical
    /// either way; this only bounds parallelism.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

fn resolve(experiment: Experiment, args: &RunArgs) -> CliResult<RunConfig> {
    let preset = Preset::parse(&args.preset)?;
    let mut file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    if let Some(seed) = args.seed {
        file.seed = Some(seed);
    }
    if let Some(out) = &args.out {
        file.output_dir = Some(out.display().to_string());
    }
    RunConfig::resolve(experiment, preset, &file)
}

fn run(cli: Cli) -> CliResult<()> {
    let (experiment, args) = cli.command.split();
    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(CliError::Config("threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = resolve(experiment, &args)?;
    match experiment {
        Experiment::ParticleTrace => experiments::particle_trace::run(&cfg),
        Experiment::TeacherStudentSweep => experiments::teacher_student::run(&cfg),
        Experiment::ImplicitBias2d => experiments::bias2d::run(&cfg),
        Experiment::ImplicitBiasHighdim => experiments::bias_highdim::run(&cfg),
        Experiment::Certificate => experiments::certificate::run(&cfg),
        Experiment::Equivalence => experiments::equivalence::run(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
