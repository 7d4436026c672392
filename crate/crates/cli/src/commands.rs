//! The headless subcommands, as functions.

use std::fs;
use std::path::{Path, PathBuf};

use aerotwin_core::operator::Scenario;
use aerotwin_core::replay::{run_scenario, ReplayError};
use aerotwin_core::report::{build_report, PublishedReference, Report};
use aerotwin_core::telemetry::csv::export_csv;
use aerotwin_core::telemetry::record::SessionRecord;
use aerotwin_core::Config;

use crate::error::CliError;

/// Loads and validates a config file, or the built-in defaults.
pub fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    let config = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    config.validate()?;
    Ok(config)
}

#[derive(Debug)]
pub struct ReplayOutput {
    pub record: SessionRecord,
    pub record_path: PathBuf,
    pub csv_path: PathBuf,
    pub report_path: PathBuf,
    pub report: Report,
}

/// Runs a scenario file and writes the record to `out`, with the CSV export
/// and text report next to it (`.csv`, `.txt`).
pub fn cmd_replay(config: &Config, script: &Path, out: &Path) -> Result<ReplayOutput, CliError> {
    let scenario = Scenario::load(script).map_err(ReplayError::from)?;
    let record = run_scenario(config, &scenario)?;
    let report = build_report(&record, None, PublishedReference::for_record(&record))?;

    let csv_path = out.with_extension("csv");
    let report_path = out.with_extension("txt");
    record.save(out)?;
    export_csv(&record, &csv_path)?;
    fs::write(&report_path, report.to_string()).map_err(|e| CliError::write(&report_path, e))?;
    Ok(ReplayOutput {
        record,
        record_path: out.to_path_buf(),
        csv_path,
        report_path,
        report,
    })
}

/// Report over `[from, to]`; open ends default to the record's extent.
pub fn cmd_analyze(
    record_path: &Path,
    from: Option<f64>,
    to: Option<f64>,
    with_reference: bool,
) -> Result<Report, CliError> {
    let record = SessionRecord::load(record_path)?;
    let window = (from.unwrap_or(0.0), to.unwrap_or_else(|| record.duration()));
    let reference = if with_reference {
        PublishedReference::for_record(&record)
    } else {
        None
    };
    Ok(build_report(&record, Some(window), reference)?)
}

/// Validates a config and, optionally, a scenario against it.
pub fn cmd_validate(config_path: &Path, script: Option<&Path>) -> Result<String, CliError> {
    let config = load_config(Some(config_path))?;
    let mut summary = format!(
        "config ok: {} Hz simulation, {} Hz stream, port {}",
        config.telemetry.sim_rate, config.telemetry.rate, config.telemetry.port
    );
    if let Some(path) = script {
        let scenario = Scenario::load(path).map_err(ReplayError::from)?;
        scenario
            .validate(&config.links(), &config.joint_limits())
            .map_err(ReplayError::from)?;
        let what = if scenario.waypoints.is_empty() {
            format!("{} keyframes", scenario.keyframes.len())
        } else {
            format!("{} waypoints", scenario.waypoints.len())
        };
        summary.push_str(&format!("\nscenario ok: {what}"));
    }
    Ok(summary)
}
