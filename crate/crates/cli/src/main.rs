use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Train-ground mm-wave downlink simulator and receive-beam learners.
#[derive(Debug, Parser)]
#[command(name = "railbeam", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment file; every key is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (overrides `experiment.out_dir`).
    #[arg(long, global = true, env = "RAILBEAM_OUT_DIR")]
    pub out: Option<PathBuf>,

    /// Seed; may be repeated for `simulate`. Defaults to `experiment.seeds`.
    #[arg(long = "seed", global = true)]
    pub seeds: Vec<u64>,

    /// Agent: dqn, qlearning, gamma-greedy, fba or codebook16.
    /// May be repeated for `simulate`.
    #[arg(long = "agent", global = true)]
    pub agents: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every configured agent for every seed and compare them.
    Simulate,
    /// Train one agent and save its model, report and policy.
    Train,
    /// Greedy rollout of a saved model.
    Eval {
        /// Model file; defaults to the one `train` writes.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Exhaustive per-bin grid search over beam directions.
    Oracle,
    /// Beam database plus repeated utilisation/exploration passes.
    Cycles {
        /// Model file; trained from scratch when absent.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

/// Marks errors caused by the invocation or the configuration (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn is_usage(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<UsageError>()
            || matches!(
                e.downcast_ref::<railbeam_core::Error>(),
                Some(railbeam_core::Error::InvalidConfig(_))
                    | Some(railbeam_core::Error::Format { kind: "config", .. })
            )
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate => commands::simulate(&cli.common),
        Command::Train => commands::train(&cli.common),
        Command::Eval { model } => commands::eval(&cli.common, model),
        Command::Oracle => commands::oracle(&cli.common),
        Command::Cycles { model } => commands::cycles(&cli.common, model),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_usage(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
