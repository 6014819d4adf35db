//! `dermvgg` command-line tool.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 data error
//! (dataset layout, undecodable image), 3 numeric abort (non-finite loss),
//! 4 weight archive does not match the graph or dataset.

mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{EvalArgs, EvalConfig, PredictArgs, PredictConfig, TrainArgs, TrainConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "dermvgg", version, about = "Train and evaluate a modified-VGG16 skin-lesion classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the network on <data-dir>/train and write checkpoints.
    Train(TrainArgs),
    /// Evaluate a model archive on <data-dir>/test and write reports.
    Evaluate(EvalArgs),
    /// Classify one image.
    Predict(PredictArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => commands::cmd_train(&TrainConfig::resolve(&args)?),
        Command::Evaluate(args) => commands::cmd_evaluate(&EvalConfig::resolve(&args)?),
        Command::Predict(args) => commands::cmd_predict(&PredictConfig::resolve(&args)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
