//! Command-line front end: configuration, subcommands and the acceptance
//! criteria.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod validate;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{Config, Format, Overrides};

#[derive(Debug, Parser)]
#[command(
    name = "logergodic",
    version,
    about = "Log-ergodic simulation, trading, rotation and pricing toolkit"
)]
pub struct Cli {
    /// TOML config file, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root; each command writes into `<out>/<command>/`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate GBM price paths.
    Simulate,
    /// Build Z-processes from simulated paths and derive trading signals.
    Trade {
        /// Directory of a simulate run (defaults to `<out>/simulate`).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Irrational-rotation diagnostics and the angle process.
    Rotate,
    /// Pricing sweep across all engines.
    Price,
    /// Run the acceptance criteria.
    Validate {
        /// Comma-separated criterion ids to run (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        format: cli.format,
    };
    let mut cfg = match Config::resolve(cli.config.as_deref(), &overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_USAGE;
        }
    };
    let result = match cli.command {
        Command::Simulate => commands::simulate(&cfg).map(|dir| report(&dir)),
        Command::Trade { input } => {
            if input.is_some() {
                cfg.trade.input = input;
            }
            commands::trade(&cfg).map(|dir| report(&dir))
        }
        Command::Rotate => commands::rotate(&cfg).map(|dir| report(&dir)),
        Command::Price => commands::price(&cfg).map(|dir| report(&dir)),
        Command::Validate { only } => {
            if let Some(bad) = only.iter().find(|id| validate::criterion(id).is_none()) {
                eprintln!("error: unknown criterion `{bad}`");
                return EXIT_USAGE;
            }
            commands::validate(&cfg, &only).map(|(dir, outcomes)| {
                for o in &outcomes {
                    println!("{}", o.line());
                }
                let failed = outcomes.iter().filter(|o| !o.passed).count();
                println!(
                    "{} passed, {failed} failed; report in {}",
                    outcomes.len() - failed,
                    dir.display()
                );
                if failed == 0 {
                    EXIT_OK
                } else {
                    EXIT_VALIDATION
                }
            })
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn report(dir: &std::path::Path) -> i32 {
    println!("wrote {}", dir.display());
    EXIT_OK
}
