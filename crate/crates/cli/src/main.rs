//! `qspd`: seeded, reproducible runs of the discrimination simulator.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Format;

#[derive(Debug, Parser)]
#[command(name = "qspd", version, about = "Coherent channel discrimination simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output format.
    #[arg(long, value_enum, default_value = "csv", global = true)]
    pub format: Format,
    /// Shorthand for `--format json`.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write a gnuplot script for the CSV written to `--out`.
    #[arg(long, global = true)]
    pub gnuplot: Option<PathBuf>,
    /// RNG seed recorded in every output.
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
}

impl Common {
    pub fn format(&self) -> Format {
        if self.json {
            Format::Json
        } else {
            self.format
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    /// Noiseless, instantaneous lasers.
    Ideal,
    /// Measured error budget and 200 µs laser pulses.
    #[value(alias = "paper")]
    Lab,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// psk3, ask3, ask3-exact, or a JSON sequence file.
    #[arg(long, default_value = "psk3")]
    pub seq: String,
    /// Encoding of a sequence file.
    #[arg(long)]
    pub encoding: Option<String>,
    #[arg(long, value_enum, default_value = "ideal")]
    pub profile: Profile,
    #[arg(long, allow_hyphen_values = true)]
    pub detuning_hz: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rf_amp_error: Option<f64>,
    #[arg(long)]
    pub laser_error: Option<f64>,
    #[arg(long)]
    pub spam_error: Option<f64>,
    #[arg(long)]
    pub leakage_rate: Option<f64>,
    /// Laser π-pulse duration in seconds.
    #[arg(long)]
    pub laser_duration: Option<f64>,
    /// Free evolution between pulses in seconds.
    #[arg(long)]
    pub pulse_gap: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one oracle query sequence and print readout probabilities.
    Run {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 0)]
        oracle: usize,
        /// Also draw one outcome with the seed.
        #[arg(long)]
        sample: bool,
    },
    /// Sweep the oracle angle, rf detuning or time.
    Scan {
        #[arg(value_enum)]
        kind: ScanKind,
        #[command(flatten)]
        sim: SimArgs,
        /// `start:stop:points`.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Oracle index for time scans.
        #[arg(long, default_value_t = 0)]
        oracle: usize,
    },
    /// Compare an accuracy with incoherent strategies.
    Baselines {
        #[arg(long, default_value_t = 0.994)]
        accuracy: f64,
        /// Coherent accuracy to list; simulated under the lab profile if absent.
        #[arg(long)]
        coherent: Option<f64>,
        #[arg(long, default_value = "psk")]
        encoding: String,
    },
    /// Chebyshev bisection over 2^k ASK candidates.
    Bisect {
        #[arg(long)]
        n: usize,
        /// Simulate every hidden index.
        #[arg(long)]
        verify: bool,
    },
    /// Feed-forward field servo against a drift model.
    Servo {
        #[arg(long, value_enum, default_value = "lab")]
        preset: DriftPreset,
        #[arg(long, default_value_t = 600.0)]
        duration: f64,
        #[arg(long, allow_hyphen_values = true)]
        light_shift_hz: Option<f64>,
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Allan deviation of a synthetic drift record.
    Allan {
        #[arg(long, value_enum, default_value = "lab")]
        preset: DriftPreset,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        /// Comma-separated averaging times in seconds.
        #[arg(long, default_value = "1,2,5,10,20,50,100,200,500,1000")]
        taus: String,
    },
    /// Continuous rf Rabi drive of the D manifold.
    Rabi {
        /// Starting sublevel as 2m.
        #[arg(long, default_value_t = -3, allow_hyphen_values = true)]
        start: i32,
        #[arg(long, default_value_t = 6)]
        dim: usize,
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        detuning_hz: f64,
    },
    /// Drive from m = -5/2 with the m = -1/2 level light shifted.
    LightShift {
        #[arg(long)]
        shift_hz: f64,
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScanKind {
    Angle,
    Detuning,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DriftPreset {
    #[value(alias = "paper")]
    Lab,
    White,
    None,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let line = std::iter::once("qspd".to_string()).chain(std::env::args().skip(1)).collect::<Vec<_>>().join(" ");
    match commands::execute(&cli, &line) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
