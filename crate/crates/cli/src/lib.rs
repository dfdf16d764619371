//! Batch driver for walk-sum simulations: configs in, CSV and JSON out.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use anyhow::Result;

pub use config::{Overrides, RunConfig};

/// Result of one command run.
#[derive(Clone, Debug)]
pub struct Outcome {
    /// False when results were written but are not converged (or, for
    /// `validate`, a check failed).
    pub converged: bool,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.converged {
            0
        } else {
            2
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Validate,
    FreePairs,
    Complexity,
    G2Analytic,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Validate => "validate",
            Command::FreePairs => "free-pairs",
            Command::Complexity => "complexity",
            Command::G2Analytic => "g2-analytic",
        }
    }
}

pub fn run(command: Command, config: &RunConfig) -> Result<Outcome> {
    config.check()?;
    match command {
        Command::Simulate => commands::simulate::run(config),
        Command::Validate => commands::validate::run(config),
        Command::FreePairs => commands::free_pairs::run(config),
        Command::Complexity => commands::complexity::run(config),
        Command::G2Analytic => commands::g2::run(config),
    }
}
