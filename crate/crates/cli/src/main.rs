//! `matchdid`: matched-control difference-in-differences from the command
//! line.
//!
//! ```text
//! matchdid match covariates.csv --k 1 --metric rank-mahalanobis --out run/
//! matchdid did panel.csv --pairs run/pairs.csv --pre 1979-1989 --post 1999-2016 --out run/
//! matchdid trend panel.csv --first 1979-1984 --second 1985-1989 --out run/
//! matchdid simulate --table 4 --reps 1000 --seed 7 --out run/
//! ```
//!
//! Exit codes: 0 success, 2 input or validation error, 3 infeasible matching,
//! 1 internal error.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use matchdid::simulation::tables::TableId;

use commands::{DidArgs, MatchArgs, SimulateArgs, TrendArgs};
use config::{Metric, RunConfig};
use error::CliResult;

#[derive(Parser)]
#[command(
    name = "matchdid",
    version,
    about = "Matched-control difference-in-differences"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for simulations.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Significance level of the confidence intervals.
    #[arg(long, global = true)]
    alpha: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimally match treated units to controls on covariates.
    Match {
        /// CSV with header unit_id,treated,<covariate...>.
        covariates: PathBuf,
        /// Controls per treated unit.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum)]
        metric: Option<Metric>,
        /// Penalize pairs outside 0.2 SD of the logit propensity score.
        #[arg(long, overrides_with = "no_caliper")]
        caliper: bool,
        #[arg(long)]
        no_caliper: bool,
        /// Penalty per unit of logit gap beyond the caliper.
        #[arg(long)]
        caliper_penalty: Option<f64>,
    },
    /// Difference-in-differences estimate for two periods.
    Did {
        /// CSV with header unit_id,group,period,outcome.
        panel: PathBuf,
        /// pairs.csv from `match`; without it the regression estimator is used.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        pre: Option<String>,
        #[arg(long)]
        post: Option<String>,
        /// Comma-separated period labels, earliest first.
        #[arg(long, value_delimiter = ',')]
        period_order: Option<Vec<String>>,
    },
    /// Test for parallel trends between two pre-treatment periods.
    Trend {
        panel: PathBuf,
        #[arg(long)]
        first: Option<String>,
        #[arg(long)]
        second: Option<String>,
        #[arg(long, value_delimiter = ',')]
        period_order: Option<Vec<String>>,
    },
    /// Reproduce one of the simulation tables (4-8).
    Simulate {
        #[arg(long)]
        table: TableId,
        /// Replications per scenario.
        #[arg(long)]
        reps: Option<usize>,
    },
}

fn run(cli: Cli) -> CliResult<String> {
    let mut cfg = RunConfig::load(cli.common.config.as_deref())?;
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(alpha) = cli.common.alpha {
        cfg.alpha = alpha;
    }
    let out = cli.common.out;
    match cli.command {
        Command::Match {
            covariates,
            k,
            metric,
            caliper,
            no_caliper,
            caliper_penalty,
        } => {
            cfg.k = k.unwrap_or(cfg.k);
            cfg.metric = metric.unwrap_or(cfg.metric);
            if caliper {
                cfg.caliper = true;
            }
            if no_caliper {
                cfg.caliper = false;
            }
            cfg.caliper_penalty = caliper_penalty.unwrap_or(cfg.caliper_penalty);
            cfg.validate()?;
            commands::cmd_match(
                &MatchArgs {
                    input: covariates,
                    out,
                },
                &cfg,
            )
        }
        Command::Did {
            panel,
            pairs,
            pre,
            post,
            period_order,
        } => {
            cfg.validate()?;
            commands::cmd_did(
                &DidArgs {
                    panel,
                    pairs,
                    pre,
                    post,
                    period_order,
                    out,
                },
                &cfg,
            )
        }
        Command::Trend {
            panel,
            first,
            second,
            period_order,
        } => {
            cfg.validate()?;
            commands::cmd_trend(
                &TrendArgs {
                    panel,
                    first,
                    second,
                    period_order,
                    out,
                },
                &cfg,
            )
        }
        Command::Simulate { table, reps } => {
            cfg.reps = reps.unwrap_or(cfg.reps);
            cfg.validate()?;
            commands::cmd_simulate(&SimulateArgs { table, out }, &cfg)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
