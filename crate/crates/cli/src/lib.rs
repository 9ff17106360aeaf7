//! `ergolab` command-line front end.
//!
//! Exit codes: `0` success, `1` numerical failure, `2` usage or parse error.
//! Errors are reported on stderr as a single JSON object.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use manifest::{ConventionArg, DensityMode, Manifest};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Parse(String),
    Core(ergolab::Error),
    Io(std::io::Error),
}

impl From<ergolab::Error> for CliError {
    fn from(e: ergolab::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => 2,
            CliError::Core(e) if e.is_numerical() => 1,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (kind, message) = match self {
            CliError::Usage(m) => ("usage", m.clone()),
            CliError::Parse(m) => ("parse", m.clone()),
            CliError::Core(e) if e.is_numerical() => ("numerical", e.to_string()),
            CliError::Core(e) => ("input", e.to_string()),
            CliError::Io(e) => ("io", e.to_string()),
        };
        json!({ "error": kind, "message": message, "exit_code": self.exit_code() })
    }
}

#[derive(Debug, Parser)]
#[command(name = "ergolab", version, about = "Ergodic dividend-control diffusion laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate paths; write a trajectory and ensemble statistics.
    Simulate(SimulateArgs),
    /// Stationary density: closed form, finite-volume solve, or both.
    Density(DensityArgs),
    /// Solve and verify the ergodic Bellman equation.
    Hjb(HjbArgs),
    /// Reward estimates over a grid of threshold strategies.
    Sweep(SweepArgs),
    /// E X_t / t curve and ergodicity verdict.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON experiment manifest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Withdrawal cap M.
    #[arg(long, allow_negative_numbers = true)]
    pub cap: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub x0: Option<f64>,
    /// Threshold strategy a(x) = c mu 1(x > x0).
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub x_init: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Keep every n-th grid point in the trajectory CSV.
    #[arg(long)]
    pub record_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub mode: Option<DensityMode>,
    #[arg(long, value_enum)]
    pub convention: Option<ConventionArg>,
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long)]
    pub cells: Option<usize>,
}

#[derive(Debug, Args)]
pub struct HjbArgs {
    #[command(flatten)]
    pub common: Common,
    /// Average reward r (defaults to mu).
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, value_enum)]
    pub convention: Option<ConventionArg>,
    #[arg(long, allow_negative_numbers = true)]
    pub grid_lo: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub grid_hi: Option<f64>,
    #[arg(long)]
    pub grid_n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Rate multiples c, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub cs: Option<Vec<f64>>,
    /// Thresholds x0, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0s: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: Common,
    /// Checkpoint times, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub checkpoints: Option<Vec<f64>>,
}

impl Common {
    /// Manifest from `--config` (or empty) with flag overrides applied.
    pub fn manifest(&self) -> Result<Manifest, CliError> {
        let mut m = match &self.config {
            Some(p) => Manifest::load(p)?,
            None => Manifest::default(),
        };
        let set = |slot: &mut Option<f64>, v: Option<f64>| {
            if v.is_some() {
                *slot = v;
            }
        };
        set(&mut m.model.mu, self.mu);
        set(&mut m.model.cap, self.cap);
        set(&mut m.model.x0, self.x0);
        set(&mut m.sim.dt, self.dt);
        set(&mut m.sim.horizon, self.horizon);
        set(&mut m.sim.x_init, self.x_init);
        if self.seed.is_some() {
            m.sim.seed = self.seed;
        }
        if self.paths.is_some() {
            m.sim.n_paths = self.paths;
        }
        if self.c.is_some() {
            m.rate_multiple = self.c;
            m.strategy = None;
        }
        Ok(m)
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("ERGOLAB_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("ERGOLAB_THREADS must be a positive integer, got '{v}'")))?;
        // A pool may already exist when embedded; the cap then stays as it was.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Runs the command line and returns the summary JSON.
pub fn execute(cli: Cli) -> Result<serde_json::Value, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Density(a) => commands::density(&a),
        Command::Hjb(a) => commands::hjb(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
    }
}

/// Full entry point: parses `args`, prints the summary or the error, and
/// returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let err = CliError::Usage(e.to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            0
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}
