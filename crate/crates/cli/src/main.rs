mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "mfg", version, about = "Finite-state mean field games: solve, simulate and verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides `mc.seed` from the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; defaults to the scenario's `outputs`, then `mfg-out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for Monte Carlo loops.
    #[arg(long, global = true, env = "MFG_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Compute the equilibrium flows, value and policy.
    Solve,
    /// Simulate single-player paths under the equilibrium.
    Simulate,
    /// Cost of the equilibrium policy by ODE, direct Monte Carlo and reweighting.
    EvaluateCost,
    /// Consistency residual, best-response gap and martingale residual.
    VerifyEquilibrium,
    /// Propagation of chaos and unilateral deviations in the finite game.
    Nplayer,
    /// Monotonicity of the state and terminal costs.
    CheckMonotone,
    /// Reweighted reference paths against the ODE cost.
    LikelihoodCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Simulate => "simulate",
            Command::EvaluateCost => "evaluate-cost",
            Command::VerifyEquilibrium => "verify-equilibrium",
            Command::Nplayer => "nplayer",
            Command::CheckMonotone => "check-monotone",
            Command::LikelihoodCheck => "likelihood-check",
        }
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    let path = cli
        .config
        .ok_or_else(|| CliError::Validation("--config <file> is required".into()))?;
    let loaded = config::load(&path)?;
    let mut ctx = Context::new(cli.command.name(), loaded, cli.seed, cli.out)?;
    let result = match cli.command {
        Command::Solve => commands::solve(&mut ctx),
        Command::Simulate => commands::simulate(&mut ctx),
        Command::EvaluateCost => commands::evaluate_cost(&mut ctx),
        Command::VerifyEquilibrium => commands::verify_equilibrium(&mut ctx),
        Command::Nplayer => commands::nplayer(&mut ctx),
        Command::CheckMonotone => commands::check_monotone(&mut ctx),
        Command::LikelihoodCheck => commands::likelihood_check(&mut ctx),
    };
    let status = match &result {
        Ok(_) => "ok",
        Err(CliError::NotConverged { .. }) => "not-converged",
        Err(_) => "failed",
    };
    ctx.finish(status)?;
    log::info!("outputs in {}", ctx.out_dir().display());
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mfg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
