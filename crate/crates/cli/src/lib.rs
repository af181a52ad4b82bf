//! Command-line experiment runner for `offloadlab`.
//!
//! Every subcommand reads one [`config::ExperimentConfig`], computes its
//! outputs in memory and only then writes them to the output directory.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::Output;
use crate::config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "offloadlab", version, about = "Energy-optimal offloading experiments")]
pub struct Cli {
    /// TOML experiment config. Built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads for sweeps (0 = one per core).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Override any config field by dotted name, e.g. `--set greedy.step=0.02`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Greedy offloading on the configured scenario.
    Optimize,
    /// Total energy over the speed and carrier-frequency grid.
    SweepModulation,
    /// Greedy against all-local energy over the data-size grid.
    SweepDatasize,
    /// Generate a training dataset from seeded scenarios.
    GenData,
    /// Fit a clustered regression model.
    Train,
    /// Predict energies for a feature CSV.
    Predict,
    /// MI ranking and k-sweep error reports per feature subset.
    Evaluate,
    /// Speeds from a GPS trajectory CSV.
    Ingest,
}

impl Cli {
    /// Config file, then `--set` overrides, then the dedicated flags.
    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        if let Some(j) = self.jobs {
            overrides.push(format!("jobs={j}"));
        }
        let mut cfg = ExperimentConfig::load(self.config.as_deref(), &overrides)?;
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn compute(command: Command, cfg: &ExperimentConfig) -> Result<Vec<Output>> {
    match command {
        Command::Optimize => commands::cmd_optimize(cfg),
        Command::SweepModulation => commands::cmd_sweep_modulation(cfg),
        Command::SweepDatasize => commands::cmd_sweep_datasize(cfg),
        Command::GenData => commands::cmd_gen_data(cfg),
        Command::Train => commands::cmd_train(cfg),
        Command::Predict => commands::cmd_predict(cfg),
        Command::Evaluate => commands::cmd_evaluate(cfg),
        Command::Ingest => commands::cmd_ingest(cfg),
    }
}

/// Runs one invocation end to end and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = cli.experiment_config()?;
    let outputs = compute(cli.command, &cfg)?;
    commands::write_outputs(&cfg.out_dir, &outputs)
}
