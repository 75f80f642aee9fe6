//! Metric scenarios run on the full loop: behaviors read vision frames and
//! send commands through the queue, bridges drive the servos, physics moves
//! the robot.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field::{SimError, WorldState};
use crate::geometry::{Pose, Vec2};
use crate::kicker::KickerState;
use crate::net::{RobotCommand, FLAG_CHARGE};
use crate::sim::{SimConfig, Simulation};
use crate::trace::TraceLog;

use super::behaviors::{go_to_point, Behavior, Contact};
use super::metrics::MetricsReport;
use super::{AimConfig, Gains};

pub const ROBOT_ID: u8 = 0;
pub const SPRINT_DISTANCE: f64 = 4.0;
pub const SLALOM_WAYPOINTS: [Vec2; 5] = [
    Vec2::new(0.0, 0.0),
    Vec2::new(1.0, 0.5),
    Vec2::new(2.0, -0.5),
    Vec2::new(3.0, 0.5),
    Vec2::new(4.0, 0.0),
];
pub const WAYPOINT_RADIUS: f64 = 0.1;
pub const GOAL_HALF_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Sprint,
    Slalom,
    TimeToBall,
    KickDistance,
    OneVZeroGoal,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Sprint,
        Scenario::Slalom,
        Scenario::TimeToBall,
        Scenario::KickDistance,
        Scenario::OneVZeroGoal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Sprint => "sprint",
            Scenario::Slalom => "slalom",
            Scenario::TimeToBall => "time_to_ball",
            Scenario::KickDistance => "kick_distance",
            Scenario::OneVZeroGoal => "one_v_zero_goal",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownScenario(pub String);

impl fmt::Display for UnknownScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
        write!(f, "unknown scenario '{}'; valid: {}", self.0, names.join(", "))
    }
}

impl std::error::Error for UnknownScenario {}

impl FromStr for Scenario {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| UnknownScenario(s.to_string()))
    }
}

/// Seeded perturbation of the ball start and robot heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Jitter {
    /// Half-width of the uniform ball offset per axis, metres.
    pub ball: f64,
    /// Half-width of the uniform heading offset, radians.
    pub heading: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Self {
            ball: 0.02,
            heading: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub sim: SimConfig,
    pub gains: Gains,
    pub aim: AimConfig,
    pub jitter: Jitter,
    /// Simulated seconds before a run is declared failed.
    pub timeout: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            gains: Gains::default(),
            aim: AimConfig::default(),
            jitter: Jitter::default(),
            timeout: 30.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.sim.validate()?;
        self.gains.validate()?;
        self.aim.validate()?;
        if !(self.jitter.ball >= 0.0 && self.jitter.heading >= 0.0) {
            return Err(SimError::InvalidParams("jitter must be nonnegative".into()));
        }
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err(SimError::InvalidParams(format!("timeout must be positive, got {}", self.timeout)));
        }
        Ok(())
    }

    fn contact(&self) -> Contact {
        Contact {
            robot_radius: self.sim.field.robot_radius,
            ball_radius: self.sim.field.ball_radius,
        }
    }

    fn goal(&self) -> Vec2 {
        Vec2::new(self.sim.field.half_length(), 0.0)
    }
}

struct Start {
    ball_offset: Vec2,
    heading: f64,
}

fn draw_start(seed: u64, jitter: &Jitter) -> Start {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |h: f64| if h > 0.0 { rng.random_range(-h..=h) } else { 0.0 };
    let bx = uniform(jitter.ball);
    let by = uniform(jitter.ball);
    let heading = uniform(jitter.heading);
    Start {
        ball_offset: Vec2::new(bx, by),
        heading,
    }
}

fn surface_gap(w: &WorldState, cfg: &ScenarioConfig) -> f64 {
    let r = &w.robots[0];
    (w.ball.pos - r.pose.position()).norm() - cfg.sim.field.robot_radius - cfg.sim.field.ball_radius
}

/// Run one scenario. The trace is written to `trace_out` when given.
pub fn run_scenario(
    scenario: Scenario,
    seed: u64,
    cfg: &ScenarioConfig,
    trace_out: Option<&mut dyn Write>,
) -> Result<MetricsReport, SimError> {
    cfg.validate()?;
    let mut log = TraceLog::new(trace_out);
    let mut sim = Simulation::new(&cfg.sim)?;
    let mut report = MetricsReport::new(scenario.name(), seed);
    match scenario {
        Scenario::Sprint => sprint(&mut sim, &mut log, cfg, &mut report)?,
        Scenario::Slalom => slalom(&mut sim, &mut log, cfg, &mut report)?,
        Scenario::TimeToBall => time_to_ball(&mut sim, &mut log, cfg, seed, &mut report)?,
        Scenario::KickDistance => kick_distance(&mut sim, &mut log, cfg, seed, &mut report)?,
        Scenario::OneVZeroGoal => one_v_zero_goal(&mut sim, &mut log, cfg, seed, &mut report)?,
    }
    log.flush().map_err(|e| SimError::Trace(e.to_string()))?;
    report.timed_out = !report.success && sim.world().t >= cfg.timeout;
    report.ball_out_of_bounds = sim.world().out_of_bounds;
    report.sim_time = sim.world().t;
    report.control_ticks = sim.control_ticks();
    report.trace_hash = log.hash();
    Ok(report)
}

fn sprint(
    sim: &mut Simulation,
    log: &mut TraceLog<'_>,
    cfg: &ScenarioConfig,
    report: &mut MetricsReport,
) -> Result<(), SimError> {
    let start = Pose::new(-SPRINT_DISTANCE / 2.0, 0.0, 0.0);
    sim.add_robot(ROBOT_ID, start, cfg.sim.bridge)?;
    sim.field.place_ball(Vec2::new(0.0, 2.0), Vec2::ZERO);
    let full = RobotCommand {
        robot_id: ROBOT_ID,
        vx_mm_s: (cfg.sim.bridge.v_max * 1000.0).round().min(i16::MAX as f64) as i16,
        ..Default::default()
    };
    let mut crossed = None;
    while crossed.is_none() && sim.world().t < cfg.timeout {
        sim.tick_observed(log, |w| {
            if crossed.is_none() && w.robots[0].pose.x - start.x >= SPRINT_DISTANCE {
                crossed = Some(w.t);
            }
        })?;
        sim.send(full);
    }
    report.sprint_time_4m = crossed;
    report.success = crossed.is_some();
    Ok(())
}

fn slalom(
    sim: &mut Simulation,
    log: &mut TraceLog<'_>,
    cfg: &ScenarioConfig,
    report: &mut MetricsReport,
) -> Result<(), SimError> {
    let first = SLALOM_WAYPOINTS[0];
    sim.add_robot(ROBOT_ID, Pose::new(first.x, first.y, 0.0), cfg.sim.bridge)?;
    sim.field.place_ball(Vec2::new(0.0, 2.0), Vec2::ZERO);
    let mut next = 0;
    let mut done = None;
    while done.is_none() && sim.world().t < cfg.timeout {
        sim.tick_observed(log, |w| {
            let p = w.robots[0].pose.position();
            while next < SLALOM_WAYPOINTS.len() && (SLALOM_WAYPOINTS[next] - p).norm() <= WAYPOINT_RADIUS {
                next += 1;
            }
            if next == SLALOM_WAYPOINTS.len() && done.is_none() {
                done = Some(w.t);
            }
        })?;
        if let (Some(target), Some(me)) = (SLALOM_WAYPOINTS.get(next), sim.vision().robot(ROBOT_ID)) {
            let mut cmd = go_to_point(&me.pose(), *target, &cfg.gains, &cfg.sim.bridge);
            cmd.robot_id = ROBOT_ID;
            sim.send(cmd);
        }
    }
    report.slalom_time = done;
    report.success = done.is_some();
    Ok(())
}

fn time_to_ball(
    sim: &mut Simulation,
    log: &mut TraceLog<'_>,
    cfg: &ScenarioConfig,
    seed: u64,
    report: &mut MetricsReport,
) -> Result<(), SimError> {
    let start = draw_start(seed, &cfg.jitter);
    sim.add_robot(ROBOT_ID, Pose::new(-2.0, 0.0, start.heading), cfg.sim.bridge)?;
    sim.field.place_ball(start.ball_offset, Vec2::ZERO);
    let behavior = Behavior::GoToBall { gains: cfg.gains };
    let contact = cfg.contact();
    let mut reached = None;
    while reached.is_none() && sim.world().t < cfg.timeout {
        sim.tick_observed(log, |w| {
            if reached.is_none() && surface_gap(w, cfg) <= cfg.sim.field.kick_gate_gap {
                reached = Some(w.t);
            }
        })?;
        if let Some(cmd) = behavior.command(ROBOT_ID, sim.vision(), &cfg.sim.bridge, &contact) {
            sim.send(cmd);
        }
    }
    report.time_to_ball = reached;
    report.success = reached.is_some();
    Ok(())
}

fn kick_distance(
    sim: &mut Simulation,
    log: &mut TraceLog<'_>,
    cfg: &ScenarioConfig,
    seed: u64,
    report: &mut MetricsReport,
) -> Result<(), SimError> {
    let start = draw_start(seed, &cfg.jitter);
    let f = cfg.sim.field;
    let robot_x = -f.half_length() + 0.5;
    sim.add_robot(ROBOT_ID, Pose::new(robot_x, 0.0, start.heading), cfg.sim.bridge)?;
    let charged = KickerState::charged(&sim.field.kicker);
    sim.field.robot_mut(ROBOT_ID)?.kicker = charged;
    let ball_x = robot_x + f.robot_radius + f.ball_radius + 0.005;
    sim.field.place_ball(Vec2::new(ball_x, 0.0), Vec2::ZERO);

    let behavior = Behavior::AimAndKick {
        gains: cfg.gains,
        aim: cfg.aim,
        goal: cfg.goal(),
    };
    let contact = cfg.contact();
    let stop = RobotCommand {
        robot_id: ROBOT_ID,
        flags: FLAG_CHARGE,
        ..Default::default()
    };
    let mut kicked_from: Option<Vec2> = None;
    let mut settled = false;
    while !settled && sim.world().t < cfg.timeout {
        let ball_before = sim.world().ball.pos;
        let tick = sim.tick(log)?;
        if kicked_from.is_none() {
            let kick = tick.reports.iter().find_map(|(_, r)| r.kick).filter(|k| k.speed > 0.0);
            if let Some(k) = kick {
                kicked_from = Some(ball_before);
                report.kick_speed = Some(k.speed);
            }
        }
        let w = sim.world();
        if kicked_from.is_some() {
            settled = w.out_of_bounds || w.ball.vel == Vec2::ZERO;
            sim.send(stop);
        } else if let Some(cmd) = behavior.command(ROBOT_ID, sim.vision(), &cfg.sim.bridge, &contact) {
            sim.send(cmd);
        }
    }
    if let (Some(from), true) = (kicked_from, settled) {
        report.kick_distance = Some((sim.world().ball.pos - from).norm());
        report.success = true;
    }
    Ok(())
}

fn one_v_zero_goal(
    sim: &mut Simulation,
    log: &mut TraceLog<'_>,
    cfg: &ScenarioConfig,
    seed: u64,
    report: &mut MetricsReport,
) -> Result<(), SimError> {
    let start = draw_start(seed, &cfg.jitter);
    sim.add_robot(ROBOT_ID, Pose::new(-2.0, 0.0, start.heading), cfg.sim.bridge)?;
    sim.field.place_ball(start.ball_offset, Vec2::ZERO);
    let goal = cfg.goal();
    let behavior = Behavior::AimAndKick {
        gains: cfg.gains,
        aim: cfg.aim,
        goal,
    };
    let contact = cfg.contact();
    let mut reached = None;
    let mut ball_out: Option<(f64, Vec2)> = None;
    while ball_out.is_none() && sim.world().t < cfg.timeout {
        sim.tick_observed(log, |w| {
            if reached.is_none() && surface_gap(w, cfg) <= cfg.sim.field.kick_gate_gap {
                reached = Some(w.t);
            }
            if ball_out.is_none() && w.out_of_bounds {
                ball_out = Some((w.t, w.ball.pos));
            }
        })?;
        if let Some(cmd) = behavior.command(ROBOT_ID, sim.vision(), &cfg.sim.bridge, &contact) {
            sim.send(cmd);
        }
    }
    report.time_to_ball = reached;
    if let Some((t, pos)) = ball_out {
        if pos.x >= goal.x && pos.y.abs() <= GOAL_HALF_WIDTH {
            report.goal_time = Some(t);
            report.success = true;
        }
    }
    Ok(())
}
