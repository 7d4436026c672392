//! Command-line entry points and the telemetry server.

pub mod commands;
pub mod error;
pub mod server;
