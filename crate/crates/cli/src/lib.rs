//! `minerload` command line: ingest, transform, test, fit, simulate, report.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use minerload_core::panel::Season;
use minerload_core::{Error, Result};

use artifacts::Staging;
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "minerload", version, about = "Demand-response modeling pipeline for large mining loads")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set fit.gls_passes=1`. Repeatable.
    #[arg(long = "set", value_name = "K=V", global = true)]
    pub overrides: Vec<String>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `summer` or `non_summer`.
    #[arg(long, global = true, value_parser = parse_season)]
    pub season: Option<Season>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Load and align input CSVs into panel.csv with a gap report.
    Ingest,
    /// Fit the series transforms; writes transform.json and transformed.csv.
    Transform,
    /// Summary statistics, test battery and correlations; writes tests.json.
    Test,
    /// Fit the demand model; writes model.json, fit.json and fit_series.csv.
    Fit,
    /// Generate a synthetic panel from the preset or a model JSON.
    Simulate,
    /// Merge the artifacts into report.json plus plot CSVs.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Transform => "transform",
            Command::Test => "test",
            Command::Fit => "fit",
            Command::Simulate => "simulate",
            Command::Report => "report",
        }
    }
}

fn parse_season(s: &str) -> std::result::Result<Season, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Resolves the configuration: file, then `--set`, then the dedicated flags.
pub fn resolve_config(cli: &Cli) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.season.is_some() {
        cfg.season = cli.season;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    cfg.validate()?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

/// Runs one subcommand; outputs appear only if it succeeds.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let (cfg, out) = resolve_config(cli)?;
    let mut staging = Staging::new(&out)?;
    let result = match cli.command {
        Command::Ingest => commands::ingest(&cfg, &mut staging),
        Command::Transform => commands::transform(&cfg, &out, &mut staging),
        Command::Test => commands::test(&cfg, &out, &mut staging),
        Command::Fit => commands::fit(&cfg, &out, &mut staging),
        Command::Simulate => commands::simulate(&cfg, &mut staging),
        Command::Report => commands::report(&cfg, &out, &mut staging),
    };
    match result {
        Ok(()) => staging.commit(),
        Err(e) => {
            staging.abort();
            Err(e)
        }
    }
}

/// Machine-readable error document.
pub fn error_json(command: Command, err: &Error) -> serde_json::Value {
    let mut stages = Vec::new();
    let mut cur = err;
    while let Error::Stage { stage, source } = cur {
        stages.push(stage.clone());
        cur = source;
    }
    json!({
        "error": {
            "command": command.name(),
            "kind": err.kind(),
            "stages": stages,
            "message": cur.to_string(),
            "detail": err.to_string(),
        }
    })
}
