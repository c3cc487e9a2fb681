use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scfind_tuner_cli::commands::{self, ApplyArgs, EvalArgs, GenArgs, ImportanceArgs, ReportArgs, TrainArgs};
use scfind_tuner_cli::config::resolve_seed;
use scfind_tuner_cli::exit_code;

/// Tune smooth-and-clip source-finder parameters with Soft Actor-Critic.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Top-level seed; falls back to the config file, then SCFIND_TUNER_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesise cubes with truth catalogs.
    Gen(GenArgs),
    /// Train an agent and write checkpoints and a training log.
    Train(TrainArgs),
    /// Run a checkpoint's deterministic policy and record the best parameters.
    Eval(EvalArgs),
    /// Score fixed parameters over a set of patches.
    Apply(ApplyArgs),
    /// Rank parameter importance from a training log.
    Importance(ImportanceArgs),
    /// Write plot-ready CSVs from training and evaluation outputs.
    Report(ReportArgs),
}

fn run(cli: Cli) -> scfind_tuner::Result<()> {
    match cli.command {
        Command::Gen(a) => {
            let seed = resolve_seed(cli.seed, None)?;
            let manifest = commands::gen(&a, seed)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
        }
        Command::Train(a) => {
            commands::train(&a, cli.seed)?;
        }
        Command::Eval(a) => {
            commands::eval(&a, cli.seed)?;
        }
        Command::Apply(a) => {
            commands::apply(&a)?;
        }
        Command::Importance(a) => {
            commands::importance(&a, resolve_seed(cli.seed, None)?)?;
        }
        Command::Report(a) => {
            commands::report(&a)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
