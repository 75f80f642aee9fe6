use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod packet;
mod scan;
mod simulate;
mod sweep;

/// Simulator, servo-bus and kicker tooling for the dynapitch stack.
#[derive(Debug, Parser)]
#[command(name = "dynapitch", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a metric scenario and write its trace and metrics.
    Simulate(SimulateArgs),
    /// Broadcast PING on a virtual bus and list the servos that answer.
    ScanBus(ScanArgs),
    /// Encode or decode servo-bus frames.
    Packet(PacketArgs),
    /// Tabulate kick speed over capacitor voltage and efficiency.
    KickSweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// sprint, slalom, time_to_ball, kick_distance or one_v_zero_goal.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON run configuration.
    #[arg(long, env = "DYNAPITCH_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory for trace.jsonl, metrics.json and metrics.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Simulated-seconds cap; replaces the scenario timeout.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Take live commands over UDP and publish vision instead of running a scenario.
    #[arg(long)]
    pub serve: bool,
    #[arg(long)]
    pub cmd_port: Option<u16>,
    #[arg(long)]
    pub vision_port: Option<u16>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Number of servos on the bus, ids 1..=n.
    #[arg(long, short = 'n', default_value_t = 4, value_parser = clap::value_parser!(u8).range(1..=16))]
    pub servos: u8,
}

#[derive(Debug, Args)]
pub struct PacketArgs {
    #[command(subcommand)]
    pub direction: packet::Direction,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Capacitor voltages as START:STOP:STEP or a single value.
    #[arg(long, default_value = "0:190:10")]
    pub v_cap: String,
    /// Efficiencies as START:STOP:STEP or a single value.
    #[arg(long, default_value = "0.02")]
    pub eta: String,
}

/// A failure with its process exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Scenario(String),
    Decode(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Scenario(_) => 2,
            Failure::Decode(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Scenario(m) | Failure::Decode(m) => m,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(format!("{e:#}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::ScanBus(a) => scan::run(a),
        Command::Packet(a) => packet::run(a.direction),
        Command::KickSweep(a) => sweep::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
