use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use walksum_cli::{run, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "walksum", version = walksum_cli::output::VERSION, about = "Walk-sum simulations of Rydberg lattices")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve the lattice and write correlation maps and a summary.
    Simulate,
    /// Compare walk sums with exact, Taylor and truncated references.
    Validate,
    /// Mark free-pair sites of the configured geometry.
    FreePairs,
    /// Walk counts and operation counts over a lattice-size sweep.
    Complexity,
    /// Closed-form pair correlation against two-atom dynamics.
    G2Analytic,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (falls back to WALKSUM_WORKERS).
    #[arg(long, global = true, env = "WALKSUM_WORKERS")]
    workers: Option<usize>,
    /// Evaluation time in μs; repeat for several.
    #[arg(long = "t", global = true)]
    times: Vec<f64>,
    #[arg(long, global = true)]
    lmax_final: Option<usize>,
    #[arg(long, global = true)]
    lmax_virtual: Option<usize>,
    #[arg(long, global = true)]
    kmax: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
}

fn execute(cli: Cli) -> Result<i32> {
    let c = cli.common;
    if let Some(n) = c.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let mut config = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply(&Overrides {
        out: c.out,
        seed: c.seed,
        times: c.times,
        l_final: c.lmax_final,
        l_virtual: c.lmax_virtual,
        k_max: c.kmax,
        tol: c.tol,
    });
    let command = match cli.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::Validate => Command::Validate,
        Cmd::FreePairs => Command::FreePairs,
        Cmd::Complexity => Command::Complexity,
        Cmd::G2Analytic => Command::G2Analytic,
    };
    let outcome = run(command, &config)?;
    println!("{}: {}", command.name(), outcome.summary);
    for f in &outcome.files {
        println!("  wrote {}", f.display());
    }
    if !outcome.converged {
        eprintln!("warning: results written but not converged");
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
