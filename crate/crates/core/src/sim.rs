//! The control loop: vision sampling, command delivery, bridges and physics
//! advanced together at the control rate.

use serde::{Deserialize, Serialize};

use crate::bridge::{Bridge, BridgeConfig, TickReport};
use crate::field::{Field, FieldParams, SimError, WorldState};
use crate::geometry::Pose;
use crate::kicker::KickerParams;
use crate::kinematics::WheelConfig;
use crate::net::{CommandQueue, CommandSender, RobotCommand, VisionFrame, VisionPublisher, DEFAULT_VISION_RATE};
use crate::trace::{TraceLog, TraceRecord};

/// Everything that parametrizes a simulated run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub field: FieldParams,
    pub wheels: WheelConfig,
    pub kicker: KickerParams,
    pub bridge: BridgeConfig,
    pub vision_rate: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            field: FieldParams::default(),
            wheels: WheelConfig::default(),
            kicker: KickerParams::default(),
            bridge: BridgeConfig::default(),
            vision_rate: DEFAULT_VISION_RATE,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.field.validate()?;
        self.wheels.validate()?;
        self.kicker.validate()?;
        self.bridge.validate(self.field.physics_dt)?;
        if !(self.vision_rate.is_finite() && self.vision_rate > 0.0) {
            return Err(SimError::InvalidParams(format!(
                "vision_rate must be positive, got {}",
                self.vision_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlTick {
    /// Present when a vision sample was taken at the start of this tick.
    pub frame: Option<VisionFrame>,
    pub reports: Vec<(u8, TickReport)>,
}

/// A field with one bridge per robot, fed through an ordered command queue.
///
/// Commands queued during control tick `k` are delivered to the bridges at
/// tick `k + 1`.
#[derive(Debug)]
pub struct Simulation {
    pub field: Field,
    pub bridges: Vec<Bridge>,
    queue: CommandQueue,
    publisher: VisionPublisher,
    latest: VisionFrame,
    control_tick: u64,
    substeps: u32,
    dropped: u64,
}

impl Simulation {
    pub fn new(cfg: &SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        Ok(Self {
            field: Field::new(cfg.field, cfg.wheels, cfg.kicker)?,
            bridges: Vec::new(),
            queue: CommandQueue::new(),
            publisher: VisionPublisher::new(cfg.vision_rate),
            latest: VisionFrame::default(),
            control_tick: 0,
            substeps: cfg.bridge.substeps(cfg.field.physics_dt),
            dropped: 0,
        })
    }

    pub fn add_robot(&mut self, id: u8, pose: Pose, bridge: BridgeConfig) -> Result<(), SimError> {
        self.field.add_robot(id, pose)?;
        self.bridges.push(Bridge::new(id, bridge));
        Ok(())
    }

    pub fn sender(&self) -> CommandSender {
        self.queue.sender()
    }

    pub fn send(&self, cmd: RobotCommand) {
        self.queue.push(cmd);
    }

    /// Most recent vision frame; all zeros before the first tick.
    pub fn vision(&self) -> &VisionFrame {
        &self.latest
    }

    pub fn world(&self) -> &WorldState {
        &self.field.state
    }

    pub fn control_ticks(&self) -> u64 {
        self.control_tick
    }

    /// Commands addressed to robots that are not on the field.
    pub fn dropped_commands(&self) -> u64 {
        self.dropped
    }

    pub fn tick(&mut self, trace: &mut TraceLog<'_>) -> Result<ControlTick, SimError> {
        self.tick_observed(trace, |_| {})
    }

    /// One control tick; `on_step` sees the world after every physics step.
    pub fn tick_observed(
        &mut self,
        trace: &mut TraceLog<'_>,
        mut on_step: impl FnMut(&WorldState),
    ) -> Result<ControlTick, SimError> {
        let frame = self.publisher.poll(&self.field.state);
        if let Some(f) = &frame {
            self.latest = f.clone();
        }

        for cmd in self.queue.drain() {
            match self.bridges.iter_mut().find(|b| b.robot_id == cmd.robot_id) {
                Some(b) => b.receive(cmd),
                None => self.dropped += 1,
            }
        }
        let mut reports = Vec::with_capacity(self.bridges.len());
        for bridge in &mut self.bridges {
            reports.push((bridge.robot_id, bridge.process_tick(&mut self.field)?));
        }

        for _ in 0..self.substeps {
            self.field.step()?;
            on_step(&self.field.state);
        }

        trace
            .record(&TraceRecord::from_world(self.control_tick, &self.field.state))
            .map_err(|e| SimError::Trace(e.to_string()))?;
        self.control_tick += 1;
        Ok(ControlTick { frame, reports })
    }
}
