//! The `hygt` command-line tool: synthesize residual datasets, train per-class
//! HyGT bundles, apply them in float or integer arithmetic, and report gains
//! and memory against the KLT.
//!
//! Exit codes: 0 success, 1 argument error, 2 I/O or malformed file, 3 numerical failure.

pub mod commands;
pub mod error;
pub mod format;
pub mod report;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{
    apply, evaluate, export_matrix, generate, load_bundle, load_dataset, parse_matrix, save_bundle, save_dataset,
    train, Arithmetic, Direction, TrainOptions,
};
pub use error::{CliError, Result};
pub use format::{read_bundle, read_dataset, write_bundle, write_dataset, BundleModels, ModelBundle, SampleFormat};
pub use report::{EvalReport, TrainReport};

#[derive(Debug, Parser)]
#[command(name = "hygt", version, about = "Train and apply Hypercube-Givens transforms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a 2-D AR(1) residual dataset.
    GenData(GenDataArgs),
    /// Train one HyGT per class of a dataset.
    Train(TrainArgs),
    /// Transform every block of a dataset with its class model.
    Apply(ApplyArgs),
    /// Report coding gain and memory against the KLT.
    Eval(EvalArgs),
    /// Write a class transform as a text matrix.
    ExportMatrix(ExportArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Block side length; vectors have block_size² entries.
    #[arg(long)]
    pub block_size: usize,
    #[arg(long)]
    pub rho: f64,
    /// Blocks per class.
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub classes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub rounds: usize,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Angle code width; 0 stores float angles.
    #[arg(long, default_value_t = 0)]
    pub angle_bits: u32,
    #[arg(long, default_value_t = hygt_core::DEFAULT_PRECISION_BITS)]
    pub precision_bits: u32,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the training summary as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ArithmeticArg {
    Float,
    Fixed,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "forward")]
    pub direction: DirectionArg,
    #[arg(long, value_enum, default_value = "float")]
    pub arithmetic: ArithmeticArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model bundle; repeat together with --data to combine several bundles.
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub class: usize,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => commands::write_file(path, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("cannot write to stdout", e)),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => {
            let data = generate(a.block_size, a.rho, a.count, a.classes, a.seed)?;
            save_dataset(&a.out, &data, SampleFormat::F32)
        }
        Command::Train(a) => {
            let data = load_dataset(&a.data)?;
            let opts = TrainOptions {
                rounds: a.rounds,
                restarts: a.restarts,
                seed: a.seed,
                angle_bits: a.angle_bits,
                precision_bits: a.precision_bits,
            };
            let (bundle, report, warnings) = train(&data, &opts)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            save_bundle(&a.out, &bundle)?;
            for c in &report.classes {
                println!(
                    "class {}: hygt {:.4} dB, klt {:.4} dB, ratio {:.4}",
                    c.class_id, c.hygt_gain_db, c.klt_gain_db, c.gain_ratio
                );
            }
            match &a.report {
                Some(path) => commands::write_file(path, report::to_json(&report).as_bytes()),
                None => Ok(()),
            }
        }
        Command::Apply(a) => {
            let bundle = load_bundle(&a.model)?;
            let data = load_dataset(&a.data)?;
            let direction = match a.direction {
                DirectionArg::Forward => Direction::Forward,
                DirectionArg::Inverse => Direction::Inverse,
            };
            let arithmetic = match a.arithmetic {
                ArithmeticArg::Float => Arithmetic::Float,
                ArithmeticArg::Fixed => Arithmetic::Fixed,
            };
            let out = apply(&bundle, &data, direction, arithmetic)?;
            save_dataset(&a.out, &out, SampleFormat::F64)
        }
        Command::Eval(a) => {
            if a.model.len() != a.data.len() {
                return Err(CliError::Argument(format!(
                    "{} --model paths but {} --data paths",
                    a.model.len(),
                    a.data.len()
                )));
            }
            let pairs = a
                .model
                .iter()
                .zip(&a.data)
                .map(|(m, d)| Ok((load_bundle(m)?, load_dataset(d)?)))
                .collect::<Result<Vec<_>>>()?;
            emit(a.out.as_ref(), &report::to_json(&evaluate(&pairs)?))
        }
        Command::ExportMatrix(a) => {
            let bundle = load_bundle(&a.model)?;
            emit(a.out.as_ref(), &export_matrix(&bundle, a.class)?)
        }
    }
}
