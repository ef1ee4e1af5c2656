// Validation guards write `!(x > 0.0)` on purpose: the negation rejects
// NaN, which the suggested `x <= 0.0` would wave through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Experiment runner for the degenerate Beltrami laboratory.
//!
//! Every subcommand reads one TOML config, applies flag overrides, and
//! writes its artifacts under `output.dir/<config-hash>/`. Exit codes: 0
//! when every gated check passes, 2 when the run completed but a scientific
//! check failed, 1 for usage and configuration errors.

mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use config::{Command, ExperimentConfig, Overrides};
use runner::Run;

#[derive(Parser)]
#[command(
    name = "beltrami",
    version,
    about = "Numerical experiments on Beltrami equations with degenerate coefficients",
    after_help = "Internal parallelism follows RAYON_NUM_THREADS. Outputs land in \
                  <output.dir>/<config-hash>/ so every artifact is traceable to the \
                  exact configuration that produced it."
)]
struct Cli {
    #[command(subcommand)]
    cmd: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Solve the equation and dump solution fields plus a term-norm table
    Solve(RunArgs),
    /// Verify series term decay against the analytic bounds
    Decay(RunArgs),
    /// Tabulate weighted derivative energies, on the grid and radially
    Regularity(RunArgs),
    /// Check image-area bounds on shrinking disks
    Area(RunArgs),
    /// Damped-energy sweeps, weight conversion, Jacobian energy scaling
    Sweep(RunArgs),
    /// Closed-form radial tables: annuli bounds and truncation sequences
    Radial(RunArgs),
}

/// Flags shared by all subcommands. Every flag overrides the matching
/// config field, so the config alone stays sufficient to reproduce a run.
#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML)
    #[arg(short, long, value_name = "FILE")]
    config: PathBuf,
    /// Override grid.n
    #[arg(long)]
    n: Option<usize>,
    /// Override grid.side
    #[arg(long)]
    side: Option<f64>,
    /// Override params.k_cap
    #[arg(long)]
    k_cap: Option<f64>,
    /// Override params.n_max
    #[arg(long)]
    n_max: Option<u32>,
    /// Override output.dir
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl CliCommand {
    fn split(&self) -> (Command, &RunArgs) {
        match self {
            CliCommand::Solve(a) => (Command::Solve, a),
            CliCommand::Decay(a) => (Command::Decay, a),
            CliCommand::Regularity(a) => (Command::Regularity, a),
            CliCommand::Area(a) => (Command::Area, a),
            CliCommand::Sweep(a) => (Command::Sweep, a),
            CliCommand::Radial(a) => (Command::Radial, a),
        }
    }
}

fn load(cmd: Command, args: &RunArgs) -> Result<Run> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::from_toml(&text).map_err(|e| anyhow::anyhow!(e))?;
    cfg.apply(&Overrides {
        n: args.n,
        side: args.side,
        k_cap: args.k_cap,
        n_max: args.n_max,
        out: args.out.clone(),
    });
    if let Err(violations) = cfg.validate(cmd) {
        let mut msg = format!("invalid config ({} violations):", violations.len());
        for v in &violations {
            msg.push_str("\n  - ");
            msg.push_str(v);
        }
        bail!(msg);
    }
    Ok(Run::new(cfg, cmd))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let (cmd, args) = cli.cmd.split();
    match load(cmd, args).and_then(|run| run.execute()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("beltrami {}: scientific checks failed", cmd.name());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("beltrami {}: {e}", cmd.name());
            ExitCode::from(1)
        }
    }
}
