//! Command-line front end.
//!
//! Settings are resolved as built-in defaults, then the `--config` TOML file,
//! then command-line flags. Each command writes `<command>.csv` (data) and
//! `<command>.json` (resolved configuration and search traces) to the output
//! directory.
//!
//! | command    | CSV columns |
//! |------------|-------------|
//! | `outage`   | protocol, kind, value, stderr, w_c, rho |
//! | `sweep`    | lambda, df, cf_upper, cf_lower, direct, cutset, w_c, cutset_rho, mc_df, mc_df_stderr, mc_cf, mc_cf_stderr, mc_direct, mc_direct_stderr, mc_cutset, mc_cutset_stderr |
//! | `rates`    | k, r_df, r_cf, r_direct, r_cutset, t_df, t_cf, t_direct, t_cutset |
//! | `region`   | x, y, winner, p_df, p_cf_upper, p_direct |
//! | `validate` | check, lambda, expected_lo, expected_hi, observed, stderr, pass |
//!
//! Exit codes: 0 success, 1 failed validation, 2 configuration or I/O error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{run_command, Outcome};
pub use config::{Overrides, ScenarioConfig};
pub use output::{num, Table};

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(
    name = "relay-outage",
    version,
    about = "Relay outage probabilities in Poisson interference fields"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// All estimates at one scenario point.
    Outage,
    /// Outage of every protocol along the density grid.
    Sweep,
    /// Maximum rate of every protocol along the relay distance grid.
    Rates,
    /// Preferred protocol at every relay position.
    Region,
    /// Analytic values against Monte Carlo along the density grid.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Outage => "outage",
            Command::Sweep => "sweep",
            Command::Rates => "rates",
            Command::Region => "region",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML scenario file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Monte Carlo trials.
    #[arg(long, global = true, value_name = "N")]
    pub trials: Option<u64>,
    /// Rectangles per axis of the CF bounds.
    #[arg(long, global = true, value_name = "N")]
    pub partitions: Option<usize>,
    /// Add Monte Carlo estimates to `outage` and `sweep`.
    #[arg(long, global = true)]
    pub with_mc: bool,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl Flags {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            trials: self.trials,
            partitions: self.partitions,
            with_mc: self.with_mc,
            threads: self.threads,
            out: self.out.clone(),
        }
    }
}

/// Resolves the configuration of a parsed command line.
pub fn resolve(flags: &Flags) -> Result<ScenarioConfig> {
    let mut cfg = match &flags.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    cfg.apply(&flags.overrides());
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = resolve(&cli.flags)?;
    run_command(cli.command, &cfg)
}
