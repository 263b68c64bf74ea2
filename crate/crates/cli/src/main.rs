use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use illiquid_cli::commands::{cmd_path, cmd_simulate, cmd_solve, cmd_validate, Context};

#[derive(Debug, Parser)]
#[command(
    name = "illiquid",
    version,
    about = "Optimal consumption with Poisson-arrival trading dates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Simulation seed; overrides `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for the simulation.
    #[arg(long, global = true, env = "ILLIQUID_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the growth condition; exit 0 pass, 2 borderline, 3 fail.
    Validate,
    /// Solve the reduced value function and write it.
    Solve,
    /// Solve the wealth path between two trades.
    Path,
    /// Monte Carlo check of the value function.
    Simulate,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let Some(config) = cli.config else {
        eprintln!("error: --config <FILE> is required");
        return ExitCode::from(1);
    };
    let run = Context::load(&config, cli.out, cli.seed, cli.threads).and_then(|ctx| match cli.command {
        Command::Validate => cmd_validate(&ctx),
        Command::Solve => cmd_solve(&ctx),
        Command::Path => cmd_path(&ctx),
        Command::Simulate => cmd_simulate(&ctx),
    });
    match run {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
