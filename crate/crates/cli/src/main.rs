//! `magnon-cavity-lab` command-line front end.
//!
//! Boundary units: frequencies in GHz, rates in MHz (all divided by 2π),
//! fields in mT, single-spin couplings in Hz.

mod commands;
mod error;
mod estimate;
mod manifest;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "magnon-cavity-lab", version, about = "Simulate and fit spin-ensemble / microwave-resonator transmission maps")]
#[command(after_help = "Units at the boundary: GHz for frequencies, MHz for rates (÷2π), mT for fields, Hz for the single-spin coupling.\n\
Exit codes: 0 success, 1 usage or config error, 2 I/O error, 3 fit did not converge.")]
pub struct Cli {
    /// Overrides the noise seed of a scene config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for row synthesis and slice fits (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for all output files; created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub output_dir: PathBuf,
    /// Tabular output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a |S21|² map from a scene config.
    Simulate(SimulateArgs),
    /// Fit slices, the anticrossing and the full transmission model.
    Analyze(AnalyzeArgs),
    /// Estimate spin count and couplings from sample geometry.
    Estimate(EstimateArgs),
    /// Diagonalize the macrospin ladder.
    Ladder(LadderArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scene config (JSON).
    pub config: PathBuf,
    /// Spectrum file name inside the output directory.
    #[arg(long, default_value = "spectrum.csv")]
    pub out: String,
    /// Also write an SVG heatmap.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Spectrum file written by `simulate`.
    pub spectrum: PathBuf,
    /// Linewidth trace from per-field Lorentzian fits.
    #[arg(long)]
    pub slices: bool,
    /// Fit the polariton branches.
    #[arg(long)]
    pub anticrossing: bool,
    /// Fit the transmission model to the whole map (implies --anticrossing).
    #[arg(long)]
    pub full: bool,
    /// Relative amplitude noise of the data, for the reduced chi-square.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Iteration limit for the anticrossing and full fits.
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Also write an SVG plot of the linewidth trace.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Estimate config (JSON).
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct LadderArgs {
    /// Number of spins N (integer, scientific notation allowed).
    #[arg(long)]
    pub spins: f64,
    /// Largest excitation number for the splitting table.
    #[arg(long, default_value_t = 10)]
    pub e_max: u64,
    /// Single-spin coupling g/2π, Hz.
    #[arg(long)]
    pub g_hz: f64,
    /// Resonator frequency, GHz.
    #[arg(long, default_value_t = 5.90)]
    pub f_ghz: f64,
    /// Detuning grid `start:stop:step` in MHz.
    #[arg(long, default_value = "-2000:2000:40", allow_hyphen_values = true)]
    pub detuning_mhz: String,
}

fn main() -> ExitCode {
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
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
