//! `gpamr`: command-line driver for the prolongation experiments.
//!
//! Every command prints a JSON [`report::RunReport`] on stdout. Numeric CSV
//! fields are written with 17 significant digits.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gpamr_core::{DataMode, GpConfig, ProlongMethod};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "gpamr", version, about = "Gaussian-process prolongation experiments")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON object whose keys override the command's flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build and dump the prolongation weights.
    Weights(WeightsArgs),
    /// Prolongation error of a smooth Gaussian over a grid sequence.
    Convergence(ConvergenceArgs),
    /// Run the reversing-vortex advection harness.
    Advect(AdvectArgs),
    /// Smoothness indicator over a discontinuous profile.
    AlphaDemo(AlphaDemoArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Point,
    Cell,
}

impl From<Mode> for DataMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Point => DataMode::Pointwise,
            Mode::Cell => DataMode::CellAveraged,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Vortex,
    Slotted,
}

/// Hyperparameters shared by every GP command.
#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GpArgs {
    /// `ℓ` in units of the coarse cell width.
    #[arg(long, default_value_t = 12.0)]
    pub ell_factor: f64,
    /// `σ` in units of the coarse cell width; 3 in 1-D and 2-D, 1.5 in 3-D by default.
    #[arg(long)]
    pub sigma_factor: Option<f64>,
}

impl GpArgs {
    pub fn config(&self, dim: usize, ratio: Vec<u32>, mode: DataMode) -> GpConfig {
        let mut c = GpConfig::new(dim, ratio, mode);
        c.ell_factor = self.ell_factor;
        if let Some(s) = self.sigma_factor {
            c.sigma_factor = s;
        }
        c
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct WeightsArgs {
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// One ratio, or one per dimension.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub ratio: Vec<u32>,
    #[arg(long, value_enum, default_value_t = Mode::Cell)]
    pub mode: Mode,
    #[command(flatten)]
    #[serde(flatten)]
    pub gp: GpArgs,
    /// Where to write the weights as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ConvergenceArgs {
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,512")]
    pub grids: Vec<i64>,
    #[arg(long, value_enum, default_value_t = Mode::Cell)]
    pub mode: Mode,
    #[command(flatten)]
    #[serde(flatten)]
    pub gp: GpArgs,
    /// Where to write the convergence table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct AdvectArgs {
    #[arg(long, value_enum, default_value_t = Problem::Vortex)]
    pub problem: Problem,
    /// Base grid cells per side.
    #[arg(long, default_value_t = 64)]
    pub base: i64,
    /// Refinement levels above the base.
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    #[arg(long, default_value = "gp")]
    pub prolong: ProlongMethod,
    #[arg(long, default_value_t = 2.0)]
    pub tfinal: f64,
    #[arg(long, default_value_t = 0.7)]
    pub cfl: f64,
    /// Tag threshold on the advected value; per-problem default otherwise.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 2)]
    pub regrid_every: usize,
    /// Steps between L1 samples in the time series.
    #[arg(long, default_value_t = 1)]
    pub series_every: usize,
    /// Steps between plotfiles; none when absent.
    #[arg(long)]
    pub plot_every: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub gp: GpArgs,
    /// Directory for the time series, plotfiles and report.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct AlphaDemoArgs {
    /// Cells per side over `[-1, 1]²`.
    #[arg(long, default_value_t = 128)]
    pub n: i64,
    #[command(flatten)]
    #[serde(flatten)]
    pub gp: GpArgs,
    /// Where to write `x, y, f, alpha` as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Weights(a) => commands::weights(commands::apply_config(a, cfg)?),
        Command::Convergence(a) => commands::convergence(commands::apply_config(a, cfg)?),
        Command::Advect(a) => commands::advect(commands::apply_config(a, cfg)?),
        Command::AlphaDemo(a) => commands::alpha_demo(commands::apply_config(a, cfg)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
