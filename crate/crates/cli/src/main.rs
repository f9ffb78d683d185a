//! `wscadl`: synthetic data, training, prediction, evaluation and benchmarks
//! for weakly supervised convolutional analysis dictionary learning.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod bench;
mod datagen;
mod eval;
mod predict;
mod split;
mod train;
mod util;

#[derive(Parser)]
#[command(name = "wscadl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its instance-label sidecar.
    #[command(subcommand)]
    Datagen(datagen::DatagenCommand),
    /// Split a dataset (and optional truth sidecar) into train and test files.
    Split(split::SplitArgs),
    /// Fit a model with EM.
    Train(train::TrainArgs),
    /// Predict instance labels, label sets and signal scores.
    Predict(predict::PredictArgs),
    /// Score predictions against instance truth.
    Eval(eval::EvalArgs),
    /// Time chain and tree posteriors over a grid.
    Bench(bench::BenchArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Datagen(c) => datagen::run(c),
        Command::Split(a) => split::run(a),
        Command::Train(a) => train::run(a),
        Command::Predict(a) => predict::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Bench(a) => bench::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<util::UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
