use std::path::Path;

use aerotwin_core::config::ConfigError;
use aerotwin_core::replay::ReplayError;
use aerotwin_core::telemetry::csv::CsvError;
use aerotwin_core::telemetry::record::RecordError;
use aerotwin_core::telemetry::stats::StatsError;
use aerotwin_core::Config;
use thiserror::Error;

use crate::server::ServeError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Serve(#[from] ServeError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn write(path: &Path, source: std::io::Error) -> Self {
        CliError::Write {
            path: path.display().to_string(),
            source,
        }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(e) => Config::error_code(e),
            CliError::Replay(e) => e.code(),
            CliError::Record(RecordError::Io { .. }) => "record_io",
            CliError::Record(RecordError::Corrupt(_)) => "record_corrupt",
            CliError::Record(RecordError::Replay(_)) => "simulation",
            CliError::Stats(StatsError::EmptyWindow { .. }) => "empty_window",
            CliError::Csv(_) | CliError::Write { .. } => "output_io",
            CliError::Serve(e) => e.code(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Replay(ReplayError::Config(_)) => 3,
            CliError::Replay(_) => 4,
            CliError::Record(_) | CliError::Stats(_) => 5,
            CliError::Csv(_) | CliError::Write { .. } => 6,
            CliError::Serve(_) => 7,
        }
    }

    /// `error[code]: message` on a single line.
    pub fn one_line(&self) -> String {
        let text = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {}", self.code(), text.trim())
    }
}
