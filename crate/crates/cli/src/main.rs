//! `sightline`: one entry point for geometry checks, latency budgets, the
//! pipeline simulator and the networked roles.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod budget;
mod exit;
mod geometry;
mod roles;
mod simulate;

use exit::{exit_code, Invalid};

#[derive(Parser)]
#[command(name = "sightline", version, about = "Camera-assisted collision warnings: geometry, budgets, simulation and live roles")]
struct Cli {
    /// Machine-readable JSON output
    #[arg(long, global = true)]
    json: bool,
    /// More log output on stderr (-v debug, -vv trace)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward intersection of a user ray and a sensor ray
    Intersect(geometry::RayArgs),
    /// Threat level for one user and one sensor detection
    Classify(geometry::ClassifyArgs),
    /// Split the end-to-end deadline into network allowances
    Budget(budget::BudgetArgs),
    /// Residual impact speed for a list of notification latencies
    Impact(budget::ImpactArgs),
    /// Monte-Carlo run of the detection to decision pipeline
    Simulate(simulate::SimulateArgs),
    /// Write or check scenario files
    #[command(subcommand)]
    Scenario(simulate::ScenarioCommand),
    /// Summarize a simulator CSV
    Report(simulate::ReportArgs),
    /// Run the processing node
    Serve(roles::ServeArgs),
    /// Run a sensor that streams a scenario's detection frames
    Sensor(roles::SensorArgs),
    /// Run user equipment that grades incoming events
    Consumer(roles::ConsumerArgs),
}

/// Where a command's primary output goes.
pub struct Out {
    pub json: bool,
}

impl Out {
    pub fn json<T: serde::Serialize>(&self, v: &T) -> anyhow::Result<()> {
        let mut stdout = std::io::stdout().lock();
        serde_json::to_writer_pretty(&mut stdout, v)?;
        writeln!(stdout)?;
        Ok(())
    }

    /// Single-line JSON, for streams of records.
    pub fn json_line<T: serde::Serialize>(&self, v: &T) -> anyhow::Result<()> {
        let mut stdout = std::io::stdout().lock();
        serde_json::to_writer(&mut stdout, v)?;
        writeln!(stdout)?;
        stdout.flush()?;
        Ok(())
    }

    pub fn text(&self, s: impl AsRef<str>) -> anyhow::Result<()> {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(s.as_ref().as_bytes())?;
        stdout.flush()?;
        Ok(())
    }
}

pub fn read_file(path: &PathBuf) -> anyhow::Result<String> {
    std::fs::read_to_string(path).map_err(|e| Invalid(format!("cannot read {}: {e}", path.display())).into())
}

fn init_logging(verbose: u8, networked: bool) {
    let level = match verbose {
        0 if networked => "info",
        0 => "warn",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format(|buf, rec| {
            if rec.level() == log::Level::Info {
                writeln!(buf, "{}", rec.args())
            } else {
                writeln!(buf, "{}: {}", rec.level().as_str().to_lowercase(), rec.args())
            }
        })
        .init();
}

fn dispatch(cmd: Command, out: &Out) -> anyhow::Result<()> {
    match cmd {
        Command::Intersect(a) => geometry::intersect(a, out),
        Command::Classify(a) => geometry::classify(a, out),
        Command::Budget(a) => budget::budget(a, out),
        Command::Impact(a) => budget::impact(a, out),
        Command::Simulate(a) => simulate::simulate(a, out),
        Command::Scenario(c) => simulate::scenario(c, out),
        Command::Report(a) => simulate::report(a, out),
        Command::Serve(a) => roles::serve(a, out),
        Command::Sensor(a) => roles::sensor(a, out),
        Command::Consumer(a) => roles::consumer(a, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(exit::VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let networked = matches!(cli.command, Command::Serve(_) | Command::Sensor(_) | Command::Consumer(_));
    init_logging(cli.verbose, networked);
    let out = Out { json: cli.json };
    match dispatch(cli.command, &out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            if out.json {
                let _ = out.json_line(&serde_json::json!({ "error": format!("{e:#}"), "exit_code": code }));
            }
            if code != exit::ALARM {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(code)
        }
    }
}
