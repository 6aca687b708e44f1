//! Command-line front end for the `gmxb` pricing engine.
//!
//! Exit codes: 0 success, 2 configuration error, 3 refused extreme-point
//! search, 4 numerical failure.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{execute, Command};
pub use config::{load, ConfigError, Loaded};

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::config(e.0)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gmxb",
    version,
    about = "Price and verify GLWB/GMWB guarantees"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Config file, or a bundled preset: glwb-table1, gmwb-table2.
    pub config: String,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Value at (w0, w0) and per-anniversary action counts.
    Price(Common),
    /// One CSV of optimal actions per anniversary.
    ControlMaps(Common),
    /// Values on the line x1 = const just before and after an anniversary.
    Slice {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x1: f64,
        #[arg(long)]
        anniversary: usize,
    },
    /// Bang-bang gaps, convexity/monotonicity reports and the Monte Carlo
    /// cross-check.
    Verify(Common),
    /// Value at (w0, w0) over refinement levels 0..=levels.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        levels: usize,
    },
}

/// Parses the config, sets the worker count and runs the subcommand.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (common, cmd) = match cli.command {
        Sub::Price(c) => (c, Command::Price),
        Sub::ControlMaps(c) => (c, Command::ControlMaps),
        Sub::Slice {
            common,
            x1,
            anniversary,
        } => (common, Command::Slice { x1, anniversary }),
        Sub::Verify(c) => (c, Command::Verify),
        Sub::Converge { common, levels } => (common, Command::Converge { levels }),
    };
    let loaded = load(&common.config)?;
    if loaded.config.run.threads > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(loaded.config.run.threads)
            .build_global();
    }
    let out = common
        .out
        .unwrap_or_else(|| loaded.config.output.dir.clone());
    execute(&loaded, &cmd, &out)
}
