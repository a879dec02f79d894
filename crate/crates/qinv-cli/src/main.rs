//! qinv: config-driven propagation and verification of dynamical
//! invariants for Lindblad models.
//!
//! Every subcommand takes `--config <path>` plus optional overrides
//! (`--steps`, `--T`, `--out`, `--format`, `--full`). Artifacts go to
//! stdout unless `--out` is given, in which case the file is written
//! atomically. Exit code 0 means success, 1 means a verification or
//! runtime failure, 2 means a usage or config error.

mod commands;
mod config;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::CommandOutcome;
use crate::config::{resolve, CliError, FlagOverrides, OutputFormat, RunConfig};

#[derive(Parser)]
#[command(
    name = "qinv",
    version,
    about = "Dynamical invariants of Markovian open systems: propagation, verification, and subspace analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a density matrix and emit per-step diagnostics
    PropagateState(RunArgs),
    /// Propagate a Hermitian invariant and emit its eigenvalue curves
    PropagateInvariant(RunArgs),
    /// Check a propagated invariant against its evolution equation
    VerifyInvariant(RunArgs),
    /// List candidate protected subspaces of the jump operators
    FindDfs(RunArgs),
    /// Split the model into subspace and complement blocks
    BlockDecompose(RunArgs),
    /// Propagate the subspace and complement invariant blocks
    PropagateBlocks(RunArgs),
    /// Compare eigenvalue motion against the flow law
    Eigenflow(RunArgs),
    /// Run the two-qubit dephasing example against its closed forms
    ExampleDephasing(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file
    #[arg(long)]
    config: PathBuf,
    /// Override the grid step count
    #[arg(long)]
    steps: Option<usize>,
    /// Override the final time
    #[arg(long = "T")]
    t_final: Option<f64>,
    /// Write the artifact to this path instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Artifact format
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Include raw matrices in JSON artifacts
    #[arg(long)]
    full: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_logging() {
        eprintln!("{e}");
        return ExitCode::from(2);
    }
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    type Runner = fn(&RunConfig) -> Result<CommandOutcome, CliError>;
    let (args, runner): (&RunArgs, Runner) = match &cli.command {
        Command::PropagateState(a) => (a, commands::propagate_state),
        Command::PropagateInvariant(a) => (a, commands::propagate_invariant),
        Command::VerifyInvariant(a) => (a, commands::verify_invariant),
        Command::FindDfs(a) => (a, commands::find_dfs),
        Command::BlockDecompose(a) => (a, commands::block_decompose_cmd),
        Command::PropagateBlocks(a) => (a, commands::propagate_blocks_cmd),
        Command::Eigenflow(a) => (a, commands::eigenflow),
        Command::ExampleDephasing(a) => (a, commands::example_dephasing),
    };
    let flags = FlagOverrides {
        steps: args.steps,
        t_final: args.t_final,
        out: args.out.clone(),
        format: args.format,
        full: args.full,
    };
    let cfg = resolve(&args.config, &flags)?;
    let outcome = runner(&cfg)?;

    if let Some(text) = &outcome.artifact {
        match &cfg.out_path {
            Some(path) => {
                qinv_core::atomic_write(path, text)
                    .map_err(|e| CliError::run(format!("writing {}: {e}", path.display())))?;
                println!("wrote {}", path.display());
            }
            None => print!("{text}"),
        }
    }
    for line in &outcome.summaries {
        println!("{line}");
    }
    Ok(outcome.pass)
}

/// QINV_LOG selects the level: error (default), info, or debug. Any
/// other value is a usage error.
fn init_logging() -> Result<(), CliError> {
    let level = match std::env::var("QINV_LOG") {
        Err(std::env::VarError::NotPresent) => log::LevelFilter::Error,
        Err(std::env::VarError::NotUnicode(_)) => {
            return Err(CliError::Usage(
                "QINV_LOG must be one of error, info, debug".into(),
            ));
        }
        Ok(v) => match v.as_str() {
            "error" => log::LevelFilter::Error,
            "info" => log::LevelFilter::Info,
            "debug" => log::LevelFilter::Debug,
            other => {
                return Err(CliError::Usage(format!(
                    "QINV_LOG must be one of error, info, debug; got {other:?}"
                )));
            }
        },
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format(|buf, record| writeln!(buf, "{} {}", record.level(), record.args()))
        .try_init()
        .ok();
    Ok(())
}
