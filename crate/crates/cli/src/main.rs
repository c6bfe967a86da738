use clap::{Parser, Subcommand};

use sassim_cli::figures::{figures, FiguresArgs};
use sassim_cli::run::{run, RunArgs};

/// Transient simulator advancing device dynamics with windowed
/// time-power-series solutions coupled through dynamic bus voltages.
#[derive(Parser)]
#[command(name = "sassim", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a case file or the built-in linear benchmark.
    Run(RunArgs),
    /// Emit plot-ready data files from run reports.
    Figures(FiguresArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run(args) => run(args),
        Cmd::Figures(args) => figures(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
