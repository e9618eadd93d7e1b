//! `sinesteer` command-line entry point.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "sinesteer",
    version,
    about = "Sine phase-shift steering-angle codec, training and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Random seed (run seed for training commands, scenario seed for synth).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Flat key=value config file. Keys not present keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic sessions as features/labels CSV pairs.
    Synth(commands::SynthArgs),
    /// Low-pass a sensor log, resample it onto frame times and downsample.
    Prep(commands::PrepArgs),
    /// Encode an angle as a sine activation wave (or a bin distribution).
    CodecEncode(commands::EncodeArgs),
    /// Decode a comma-separated activation wave back to an angle.
    CodecDecode(commands::DecodeArgs),
    /// Train one configuration and save its best-validation checkpoint.
    Train(commands::TrainArgs),
    /// Evaluate a checkpoint on held-out sessions.
    Eval(commands::EvalArgs),
    /// Train and evaluate every head × model pair and write the table.
    Compare(commands::CompareArgs),
    /// Emit tidy CSVs for external plotting.
    PlotData(commands::PlotArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Prep(a) => commands::prep(a),
        Command::CodecEncode(a) => commands::codec_encode(a),
        Command::CodecDecode(a) => commands::codec_decode(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Compare(a) => commands::compare(a),
        Command::PlotData(a) => commands::plot_data(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let rendered = e.to_string();
            let mut lines = rendered.lines();
            let first = lines.next().unwrap_or("usage error");
            eprintln!("ERROR 1: {}", first.trim_start_matches("error: "));
            for line in lines {
                eprintln!("{line}");
            }
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR {}: {}", e.code, e.message);
            ExitCode::from(e.code)
        }
    }
}
