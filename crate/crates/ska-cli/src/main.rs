//! `ska`: train forward-only entropy-minimizing networks and verify the
//! analytic identities behind them.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or configuration
//! error, 3 runtime divergence or export failure.

mod config;
mod logging;
mod train_cmd;
mod verify_cmd;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ska",
    version,
    about = "Forward-only training of sigmoid networks by layer-local entropy minimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network and export metric histories, a manifest, and a
    /// checkpoint.
    Train(config::TrainArgs),
    /// Run the analytic identity suite and print a pass/fail table.
    Verify,
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Train(args) => train_cmd::run(&args),
        Command::Verify => verify_cmd::run(),
    };
    std::process::exit(code);
}
