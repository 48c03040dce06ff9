use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nfl_cli::{config, run, Command};

#[derive(Parser)]
#[command(name = "nfl", version, about = "Fiber Hamiltonian experiments on a truncated Fock space")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the random parabola sweep.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Single worker and no timings in the outputs.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Run the full invariant suite and write verify.json.
    Verify,
    /// Scan the mass shell and write massshell.csv.
    Massshell,
    /// Follow the ground state along the mass schedule.
    Flow,
    /// Pull-through, resolvent bounds and the Lipschitz check.
    Infrared,
    /// Convex-analysis checks.
    Convex,
    /// Sample the standing assumptions on the grid.
    Hypotheses,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match config::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(w) = cli.workers {
        cfg.run.workers = w;
    }
    if let Some(o) = cli.out {
        cfg.run.out = o.to_string_lossy().into_owned();
    }
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    cfg.run.deterministic |= cli.deterministic;
    let cmd = match cli.command {
        Cmd::Verify => Command::Verify,
        Cmd::Massshell => Command::MassShell,
        Cmd::Flow => Command::Flow,
        Cmd::Infrared => Command::Infrared,
        Cmd::Convex => Command::Convex,
        Cmd::Hypotheses => Command::Hypotheses,
    };
    match run(cmd, cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
