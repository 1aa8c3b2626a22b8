use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dickectl::{commands, CliError, CliResult, Context};

#[derive(Debug, Parser)]
#[command(name = "dickectl", version, about = "Probe-state optimization, pulse synthesis and sensing simulations")]
struct Cli {
    /// JSON configuration file of the command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; created if missing. Defaults to `out/<command>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the random restarts; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Multi-start optimization over a grid of sizes and loss settings.
    Optimize,
    /// Cost and per-step diagnostics of one protocol.
    Evaluate,
    /// Evaluate fixture tables against their tabulated optima.
    Regress,
    /// Effective and lab-frame drive pulses of a protocol.
    Pulse,
    /// Acquisition curves under local dephasing.
    Sense,
    /// Husimi Q grids along a preparation trajectory.
    Qfunc,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Optimize => "optimize",
            Command::Evaluate => "evaluate",
            Command::Regress => "regress",
            Command::Pulse => "pulse",
            Command::Sense => "sense",
            Command::Qfunc => "qfunc",
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot size the worker pool: {e}")))?;
    }
    let ctx = Context {
        config: cli.config,
        out: cli.out.unwrap_or_else(|| PathBuf::from("out").join(cli.command.name())),
        seed: cli.seed,
        threads: cli.threads,
    };
    match cli.command {
        Command::Optimize => commands::optimize::run(&ctx),
        Command::Evaluate => commands::evaluate::run(&ctx),
        Command::Regress => commands::regress::run(&ctx),
        Command::Pulse => commands::pulse::run(&ctx),
        Command::Sense => commands::sense::run(&ctx),
        Command::Qfunc => commands::qfunc::run(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dickectl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
