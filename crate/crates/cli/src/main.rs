use std::path::PathBuf;
use std::process::ExitCode;

use aerotwin_cli::commands::{cmd_analyze, cmd_replay, cmd_validate, load_config};
use aerotwin_cli::error::CliError;
use aerotwin_cli::server::{self, ServeOptions};
use aerotwin_core::operator::Scenario;
use aerotwin_core::replay::ReplayError;
use aerotwin_core::SceneSetup;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "aerotwin", version, about = "Digital twin of a quadrotor with a teleoperated arm")]
struct Cli {
    /// Log filter, e.g. `info` or `aerotwin_cli=debug`.
    #[arg(long, global = true, env = "AEROTWIN_LOG", default_value = "info")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the simulation live and serve telemetry to operator and observers.
    Serve {
        /// Config file; built-in defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides telemetry.port from the config.
        #[arg(long, env = "AEROTWIN_PORT")]
        port: Option<u16>,
        /// Address to listen on.
        #[arg(long, default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
        /// Stop after this many simulated seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Start the clock only once the first client has connected.
        #[arg(long)]
        wait_for_client: bool,
        /// Scenario file supplying the object and start pose.
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Write the session record here on shutdown.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Run a scenario headlessly; writes the record, a CSV and a report.
    Replay {
        /// Config file; built-in defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario file with waypoints or keyframes.
        #[arg(long)]
        script: PathBuf,
        /// Record path; the CSV and report go next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print deviation statistics, events and peak torques of a record.
    Analyze {
        /// Session record written by replay or serve.
        #[arg(long)]
        record: PathBuf,
        /// Window start, s.
        #[arg(long)]
        from: Option<f64>,
        /// Window end, s.
        #[arg(long)]
        to: Option<f64>,
        /// Leave out the published reference column.
        #[arg(long)]
        no_reference: bool,
    },
    /// Check a config file, and optionally a scenario against it.
    Validate {
        /// Config file to check.
        #[arg(long)]
        config: PathBuf,
        /// Scenario file to check against the config.
        #[arg(long)]
        script: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Serve {
            config,
            port,
            bind,
            duration,
            wait_for_client,
            scene,
            record,
        } => {
            let config = load_config(config.as_deref())?;
            let mut opts = ServeOptions::new(port.unwrap_or(config.telemetry.port));
            opts.bind = bind;
            opts.duration = duration;
            opts.wait_for_client = wait_for_client;
            if let Some(path) = scene {
                let s = Scenario::load(&path).map_err(ReplayError::from)?;
                opts.scene = SceneSetup {
                    object: s.object,
                    ..SceneSetup::default()
                };
            }
            let handle = server::start(&config, opts)?;
            println!("listening on {}", handle.local_addr());
            if let Err(e) = server::stop_on_signal(handle.stop_token()) {
                log::warn!("no signal handler: {e}");
            }
            let report = handle.wait();
            println!(
                "served {} frames ({} published)",
                report.record.frames.len(),
                report.frames_published
            );
            if let Some(path) = record {
                report.record.save(&path)?;
                println!("record {}", path.display());
            }
        }
        Command::Replay {
            config,
            script,
            out,
        } => {
            let config = load_config(config.as_deref())?;
            let output = cmd_replay(&config, &script, &out)?;
            print!("{}", output.report);
            println!();
            println!("record {}", output.record_path.display());
            println!("csv    {}", output.csv_path.display());
            println!("report {}", output.report_path.display());
        }
        Command::Analyze {
            record,
            from,
            to,
            no_reference,
        } => {
            print!("{}", cmd_analyze(&record, from, to, !no_reference)?);
        }
        Command::Validate { config, script } => {
            println!("{}", cmd_validate(&config, script.as_deref())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("{}", CliError::Usage(first.to_string()).one_line());
            return ExitCode::from(2);
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.one_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
