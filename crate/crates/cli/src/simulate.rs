use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::Ordering;
use std::time::{Duration, Instant};

use anyhow::Context;
use dynapitch_core::field::SimError;
use dynapitch_core::net::{UdpCommandListener, UdpVisionSender, DEFAULT_COMMAND_PORT, DEFAULT_VISION_PORT};
use dynapitch_core::tactics::CSV_HEADER;
use dynapitch_core::trace::TraceLog;
use dynapitch_core::{run_scenario, Pose, Scenario, ScenarioConfig, Simulation, Vec2};
use serde::{Deserialize, Serialize};

use crate::{Failure, SimulateArgs};

const DEFAULT_OUT: &str = "out";

/// Contents of the `--config` JSON file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub duration: Option<f64>,
    pub out: Option<PathBuf>,
    pub cmd_port: Option<u16>,
    pub vision_port: Option<u16>,
    pub harness: ScenarioConfig,
}

impl RunConfig {
    fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Flags override file values.
    fn apply(&mut self, args: &SimulateArgs) {
        if args.scenario.is_some() {
            self.scenario.clone_from(&args.scenario);
        }
        if args.seed.is_some() {
            self.seed = args.seed;
        }
        if args.duration.is_some() {
            self.duration = args.duration;
        }
        if args.out.is_some() {
            self.out.clone_from(&args.out);
        }
        if args.cmd_port.is_some() {
            self.cmd_port = args.cmd_port;
        }
        if args.vision_port.is_some() {
            self.vision_port = args.vision_port;
        }
    }
}

pub fn run(args: SimulateArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&args);
    if let Some(d) = cfg.duration {
        cfg.harness.timeout = d;
    }
    cfg.harness.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&out)
        .with_context(|| format!("creating output directory {}", out.display()))?;

    if args.serve {
        return serve(&cfg, &out);
    }
    let name = cfg.scenario.as_deref().ok_or_else(|| {
        let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
        Failure::Usage(format!("no scenario given; valid: {}", names.join(", ")))
    })?;
    let scenario: Scenario = name.parse().map_err(|e: dynapitch_core::tactics::UnknownScenario| Failure::Usage(e.to_string()))?;
    let seed = cfg.seed.unwrap_or(0);

    let trace_path = out.join("trace.jsonl");
    let mut trace = BufWriter::new(
        File::create(&trace_path).with_context(|| format!("creating {}", trace_path.display()))?,
    );
    let report = run_scenario(scenario, seed, &cfg.harness, Some(&mut trace)).map_err(sim_failure)?;
    trace.flush().context("writing trace")?;

    let json = serde_json::to_string_pretty(&report).context("serializing metrics")?;
    fs::write(out.join("metrics.json"), json + "\n").context("writing metrics.json")?;
    let csv = format!("{CSV_HEADER}\n{}\n", report.csv_row());
    fs::write(out.join("metrics.csv"), &csv).context("writing metrics.csv")?;
    print!("{csv}");

    if report.failed() {
        let why = if report.timed_out { "timed out" } else { "did not succeed" };
        return Err(Failure::Scenario(format!("scenario {scenario} {why}")));
    }
    Ok(())
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::Trace(_) | SimError::InvalidParams(_) => Failure::Usage(e.to_string()),
        other => Failure::Scenario(other.to_string()),
    }
}

/// Live mode: one robot driven by UDP commands, vision published at the
/// configured rate, paced against the wall clock.
fn serve(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let sim_cfg = cfg.harness.sim;
    let mut sim = Simulation::new(&sim_cfg).map_err(sim_failure)?;
    sim.add_robot(0, Pose::new(-2.0, 0.0, 0.0), sim_cfg.bridge).map_err(sim_failure)?;
    sim.field.place_ball(Vec2::ZERO, Vec2::ZERO);

    let cmd_port = cfg.cmd_port.unwrap_or(DEFAULT_COMMAND_PORT);
    let vision_port = cfg.vision_port.unwrap_or(DEFAULT_VISION_PORT);
    let listener = UdpCommandListener::spawn(("0.0.0.0", cmd_port), sim.sender())
        .with_context(|| format!("binding command port {cmd_port}"))?;
    let vision = UdpVisionSender::new(SocketAddr::from(([127, 0, 0, 1], vision_port)))
        .context("opening vision socket")?;
    eprintln!(
        "serving: commands on {}, vision to 127.0.0.1:{vision_port}",
        listener.local_addr()
    );

    let trace_path = out.join("trace.jsonl");
    let mut file = BufWriter::new(File::create(&trace_path).with_context(|| format!("creating {}", trace_path.display()))?);
    let mut log = TraceLog::new(Some(&mut file));
    let dt = Duration::from_secs_f64(sim_cfg.bridge.control_dt);
    let started = Instant::now();
    let mut frames = 0u64;
    while sim.world().t < cfg.harness.timeout {
        let tick = sim.tick(&mut log).map_err(sim_failure)?;
        if let Some(frame) = tick.frame {
            // A missing receiver is normal; keep running.
            if vision.send(&frame).is_ok() {
                frames += 1;
            }
        }
        let due = started + dt * sim.control_ticks() as u32;
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            std::thread::sleep(wait);
        }
    }
    log.flush().context("writing trace")?;
    let stats = listener.stats();
    println!(
        "ticks={} vision_frames={} commands_accepted={} commands_rejected={} trace_hash={:016x}",
        sim.control_ticks(),
        frames,
        stats.accepted.load(Ordering::Relaxed),
        stats.rejected.load(Ordering::Relaxed),
        log.hash()
    );
    Ok(())
}
