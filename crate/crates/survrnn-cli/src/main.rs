//! Command-line pipeline: simulate data, train, evaluate, predict, and fit
//! the product-limit baseline. Every subcommand is deterministic under fixed
//! flags and seeds. Exit codes: 0 success, 1 runtime error, 2 usage error.

mod commands;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "survrnn",
    version,
    about = "Discrete-time survival analysis with a recurrent hazard model",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic train/test CSVs plus a ground-truth manifest.
    Simulate(commands::SimulateArgs),
    /// Train a model and write a checkpoint plus training history.
    Train(commands::TrainArgs),
    /// Evaluate a checkpoint on a test CSV (C-index, ANLP, optional KM
    /// baseline and significance tests).
    Eval(commands::EvalArgs),
    /// Write per-sample hazard/survival/event curves for an input CSV.
    Predict(commands::PredictArgs),
    /// Fit the Kaplan-Meier baseline and print its curve as CSV.
    Km(commands::KmArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Train(args) => commands::train(args),
        Command::Eval(args) => commands::eval(args),
        Command::Predict(args) => commands::predict(args),
        Command::Km(args) => commands::km(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
