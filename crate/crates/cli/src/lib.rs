//! Command-line front end for the `piic` library: configuration, CSV
//! ingestion, the four subcommands and report persistence.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod output;

use std::path::Path;

use config::{Command, Overrides, RunConfig};
use error::CliResult;
use output::{Manifest, Writer, REPORT, TABLE};

/// Loads the configuration, runs `command` and writes `report.json`,
/// `table.csv` and `manifest.json`. Returns the human-readable summary.
pub fn run(command: Command, config_path: &Path, overrides: &Overrides) -> CliResult<String> {
    let cfg = RunConfig::load(config_path, command, overrides)?;
    let outcome = match command {
        Command::Analyze => commands::analyze(&cfg)?,
        Command::Simulate => commands::simulate(&cfg)?,
        Command::CausalSim => commands::causal_sim(&cfg)?,
        Command::Diabetes => commands::diabetes(&cfg)?,
    };
    let mut manifest = Manifest::new(command.name(), &cfg, &outcome.inputs)?;
    manifest.success = outcome.failure.is_none();
    let mut writer = Writer::create(&cfg.out_dir())?;
    writer.write(REPORT, &outcome.report)?;
    writer.write(TABLE, &outcome.table.to_csv()?)?;
    writer.finish(manifest)?;
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(outcome.summary),
    }
}
