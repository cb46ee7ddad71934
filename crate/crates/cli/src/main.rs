//! Command-line front end: table reproduction, POVM export and a replayable
//! simulate/reconstruct pipeline.

mod export;
mod manifest;
mod output;
mod replay;
mod table;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use manifest::{MethodChoice, RunManifest};
use timebin::SystemKind;

pub enum Outcome {
    Complete,
    /// Number of cells that failed.
    Partial(usize),
}

#[derive(Parser)]
#[command(
    name = "timebin",
    version,
    about = "Time-bin qudit POVM simulation and state tomography"
)]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average reconstruction fidelity for every (length, jitter) cell.
    Table(RunArgs),
    /// POVM elements as JSON plus Bloch or Majorana coordinates.
    ExportPovm(RunArgs),
    /// Poisson count data for later reconstruction.
    Simulate(RunArgs),
    /// Reconstructs states from files written by `simulate`.
    Reconstruct(ReconstructArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML manifest; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    system: Option<SystemKind>,
    /// Fiber lengths in meters, comma separated.
    #[arg(long = "length-m", value_delimiter = ',', num_args = 1..)]
    length_m: Option<Vec<f64>>,
    /// Detector jitter values in ps, comma separated.
    #[arg(long = "jitter-ps", value_delimiter = ',', num_args = 1..)]
    jitter_ps: Option<Vec<f64>>,
    /// Photons per measurement operator.
    #[arg(long)]
    photons: Option<u64>,
    /// Operator count; a perfect square for entangled pairs.
    #[arg(long)]
    operators: Option<usize>,
    /// Grid points per state parameter (single photons).
    #[arg(long)]
    resolution: Option<usize>,
    /// Number of relative phases (entangled pairs).
    #[arg(long)]
    phases: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodChoice>,
    #[arg(long)]
    seed: Option<u64>,
    /// Minimum element weight relative to the peak.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl RunArgs {
    fn manifest(&self) -> Result<RunManifest> {
        let mut m = match &self.config {
            Some(path) => RunManifest::load(path)?,
            None => RunManifest::default(),
        };
        m.tool_version = env!("CARGO_PKG_VERSION").into();
        m.inputs.clear();
        m.outputs.clear();
        m.cells.clear();
        if let Some(s) = self.system {
            if s != m.system {
                m.operators = None;
            }
            m.system = s;
        }
        if let Some(v) = &self.length_m {
            m.length_m = v.clone();
        }
        if let Some(v) = &self.jitter_ps {
            m.jitter_ps = v.clone();
        }
        if let Some(v) = self.photons {
            m.photons_per_operator = v;
        }
        if let Some(v) = self.operators {
            m.operators = Some(v);
        }
        if let Some(v) = self.resolution {
            m.resolution = v;
        }
        if let Some(v) = self.phases {
            m.phases = v;
        }
        if let Some(v) = self.method {
            m.method = v;
        }
        if let Some(v) = self.seed {
            m.seed = v;
        }
        if let Some(v) = self.threshold {
            m.threshold = v;
        }
        Ok(m)
    }
}

#[derive(Args)]
struct ReconstructArgs {
    /// Data CSV files; each needs its JSON header alongside.
    #[arg(required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    /// Overrides the method recorded in the data header.
    #[arg(long, value_enum)]
    method: Option<MethodChoice>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<Outcome> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Table(a) => table::run(a.manifest()?, &a.out),
        Command::ExportPovm(a) => export::run(a.manifest()?, &a.out),
        Command::Simulate(a) => replay::simulate(a.manifest()?, &a.out),
        Command::Reconstruct(a) => replay::reconstruct(&a.data, a.method, &a.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(n)) => {
            log::error!("{n} cell(s) failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
