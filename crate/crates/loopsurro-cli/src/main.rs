//! Batch pipeline front end: profile, sample, train, simulate, benchmark,
//! and report subcommands over the loopsurro library.
//!
//! Exit codes: 0 success, 2 usage error, 3 data/consistency error,
//! 4 numerical failure.

mod commands;
mod manifest;

use clap::{Parser, Subcommand};
use loopsurro::Error;

#[derive(Parser)]
#[command(name = "loopsurro", version, about = "Neural surrogates for algebraic loops")]
struct Cli {
    /// Seed for every random choice made by the subcommand.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Optional key-value config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: std::path::PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate once and record per-dimension input bounds.
    Profile(commands::profile::ProfileArgs),
    /// Sample the input space, optionally generating Newton labels.
    Sample(commands::sample::SampleArgs),
    /// Train a surrogate (single, per-cluster, or per-branch).
    Train(commands::train::TrainArgs),
    /// Run a classical or surrogate simulation and write the trajectory.
    Simulate(commands::simulate::SimulateArgs),
    /// Time classical against surrogate variants.
    Benchmark(commands::benchmark::BenchmarkArgs),
    /// Aggregate artifacts into summary tables and gnuplot data files.
    Report(commands::report::ReportArgs),
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Parse(_) | Error::Consistency(_) | Error::Io(_) => 3,
        Error::Shape(_)
        | Error::Evaluation(_)
        | Error::Diverged(_)
        | Error::Generation(_)
        | Error::Simulation { .. }
        | Error::Selection(_) => 4,
    }
}

fn main() {
    let cli = Cli::parse();
    let ctx = commands::Context {
        seed: cli.seed,
        out_dir: cli.out_dir,
        config: cli.config,
    };
    let result = match cli.command {
        Command::Profile(args) => commands::profile::run(&ctx, args),
        Command::Sample(args) => commands::sample::run(&ctx, args),
        Command::Train(args) => commands::train::run(&ctx, args),
        Command::Simulate(args) => commands::simulate::run(&ctx, args),
        Command::Benchmark(args) => commands::benchmark::run(&ctx, args),
        Command::Report(args) => commands::report::run(&ctx, args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
