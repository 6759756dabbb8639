//! `phaseaug` command-line tool.
//!
//! Exit status: 0 on success, 1 when processing or a verification check
//! fails, 2 for usage and configuration errors.

mod commands;
mod config;
mod wav;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Failure;
use crate::config::ConfigArgs;

#[derive(Debug, Parser)]
#[command(
    name = "phaseaug",
    version,
    about = "Phase-rotation augmentation for audio"
)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Augment WAV files (or directories of them) into <stem>.aug.wav
    Augment {
        #[arg(required = true, value_name = "INPUT")]
        inputs: Vec<PathBuf>,
    },
    /// Fractionally delay one file by DELTA samples (negative advances)
    Shift {
        input: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        delta: f64,
        /// Also write `n x shifted` columns to <stem>.shift.dat
        #[arg(long)]
        emit_plot: bool,
    },
    /// Print the smoothing kernel and its statistics
    DesignFilter,
    /// Run the numerical self-checks
    Verify,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cfg = match cli.config.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Augment { inputs } => commands::augment(&cfg, inputs),
        Command::Shift {
            input,
            delta,
            emit_plot,
        } => commands::shift(&cfg, input, *delta, *emit_plot),
        Command::DesignFilter => commands::design_filter(&cfg),
        Command::Verify => commands::run_verify(&cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(e) | Failure::Processing(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.exit_code())
        }
    }
}
