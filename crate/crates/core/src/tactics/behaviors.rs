//! Scripted behaviors: pure functions from a vision snapshot to a command.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::bridge::BridgeConfig;
use crate::field::SimError;
use crate::geometry::{wrap_angle, Pose, Vec2};
use crate::net::{RobotCommand, VisionFrame, FLAG_CHARGE};

/// Below this distance the target counts as reached and heading is held.
pub const ARRIVAL_RADIUS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gains {
    /// 1/s, position error to world-frame velocity.
    pub kp: f64,
    /// 1/s, heading error to turn rate.
    pub komega: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Self { kp: 2.0, komega: 4.0 }
    }
}

impl Gains {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.kp.is_finite() && self.kp > 0.0 && self.komega.is_finite() && self.komega > 0.0) {
            return Err(SimError::InvalidParams(format!(
                "gains must be positive, got kp={} komega={}",
                self.kp, self.komega
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AimConfig {
    /// Largest heading error at which a kick is requested, radians.
    pub align_tolerance: f64,
    /// Requested kick speed, m/s.
    pub kick_speed: f64,
    /// Distance of the lineup point behind the ball centre.
    pub standoff: f64,
    /// Lateral offset from the ball-goal line still treated as lined up.
    pub line_tolerance: f64,
    /// Surface gap below which the kick field is set.
    pub kick_range: f64,
}

impl Default for AimConfig {
    fn default() -> Self {
        Self {
            align_tolerance: 0.05,
            kick_speed: 6.5,
            standoff: 0.15,
            line_tolerance: 0.03,
            kick_range: 0.03,
        }
    }
}

impl AimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.align_tolerance > 0.0 && self.align_tolerance <= FRAC_PI_4) {
            return Err(SimError::InvalidParams(format!(
                "align_tolerance {} outside (0, pi/4]",
                self.align_tolerance
            )));
        }
        for (name, v) in [
            ("kick_speed", self.kick_speed),
            ("standoff", self.standoff),
            ("line_tolerance", self.line_tolerance),
            ("kick_range", self.kick_range),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::InvalidParams(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Robot and ball radii the behaviors assume when judging contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub robot_radius: f64,
    pub ball_radius: f64,
}

impl Default for Contact {
    fn default() -> Self {
        Self {
            robot_radius: 0.09,
            ball_radius: 0.0215,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Behavior {
    GoToBall { gains: Gains },
    AimAndKick { gains: Gains, aim: AimConfig, goal: Vec2 },
    Goalkeeper { gains: Gains, line_x: f64, y_span: f64 },
}

impl Behavior {
    /// Command for `robot_id`, or `None` if the frame does not show it.
    pub fn command(
        &self,
        robot_id: u8,
        frame: &VisionFrame,
        limits: &BridgeConfig,
        contact: &Contact,
    ) -> Option<RobotCommand> {
        let pose = frame.robot(robot_id)?.pose();
        let ball = frame.ball();
        let mut cmd = match *self {
            Behavior::GoToBall { gains } => go_to_ball(&pose, ball, &gains, limits),
            Behavior::AimAndKick { gains, aim, goal } => {
                aim_and_kick(&pose, ball, goal, &aim, &gains, limits, contact)
            }
            Behavior::Goalkeeper { gains, line_x, y_span } => {
                goalkeeper(&pose, ball, line_x, y_span, &gains, limits)
            }
        };
        cmd.robot_id = robot_id;
        Some(cmd)
    }
}

/// World-frame velocity and turn rate to an in-limit wire command.
fn to_command(pose: &Pose, v_world: Vec2, omega: f64, limits: &BridgeConfig) -> RobotCommand {
    let v = v_world.clamp_norm(limits.v_max).rotated(-pose.theta);
    let cap = limits.v_max * 1000.0;
    let (mut vx, mut vy) = ((v.x * 1000.0).round(), (v.y * 1000.0).round());
    let n = vx.hypot(vy);
    if n > cap {
        vx = (vx * cap / n).trunc();
        vy = (vy * cap / n).trunc();
    }
    let w = (omega.clamp(-limits.omega_max, limits.omega_max) * 1000.0).trunc();
    RobotCommand {
        robot_id: 0,
        vx_mm_s: saturate_i16(vx),
        vy_mm_s: saturate_i16(vy),
        omega_mrad_s: saturate_i16(w),
        kick_mm_s: 0,
        flags: FLAG_CHARGE,
    }
}

fn saturate_i16(v: f64) -> i16 {
    v.clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Proportional approach to `target`, turning towards it.
pub fn go_to_point(pose: &Pose, target: Vec2, gains: &Gains, limits: &BridgeConfig) -> RobotCommand {
    let diff = target - pose.position();
    let omega = if diff.norm() < ARRIVAL_RADIUS {
        0.0
    } else {
        gains.komega * wrap_angle(diff.angle() - pose.theta)
    };
    to_command(pose, diff * gains.kp, omega, limits)
}

pub fn go_to_ball(pose: &Pose, ball: Vec2, gains: &Gains, limits: &BridgeConfig) -> RobotCommand {
    go_to_point(pose, ball, gains, limits)
}

/// Point behind the ball on the goal-ball line.
pub fn standoff_point(ball: Vec2, goal: Vec2, standoff: f64) -> Vec2 {
    let away = (ball - goal).normalized().unwrap_or(Vec2::new(-1.0, 0.0));
    ball + away * standoff
}

/// Line up behind the ball facing the goal, close in, and kick once aligned.
pub fn aim_and_kick(
    pose: &Pose,
    ball: Vec2,
    goal: Vec2,
    aim: &AimConfig,
    gains: &Gains,
    limits: &BridgeConfig,
    contact: &Contact,
) -> RobotCommand {
    let dir = (goal - ball).normalized().unwrap_or(Vec2::new(1.0, 0.0));
    let shot_heading = dir.angle();
    let rel = pose.position() - ball;
    let behind = rel.dot(dir) < 0.0;
    let lined_up = behind && rel.cross(dir).abs() <= aim.line_tolerance;
    let aligned = wrap_angle(shot_heading - pose.theta).abs() <= aim.align_tolerance;

    let target = if lined_up && aligned {
        ball
    } else {
        standoff_point(ball, goal, aim.standoff)
    };
    let omega = gains.komega * wrap_angle(shot_heading - pose.theta);
    let mut cmd = to_command(pose, (target - pose.position()) * gains.kp, omega, limits);

    let gap = rel.norm() - contact.robot_radius - contact.ball_radius;
    if lined_up && aligned && gap <= aim.kick_range {
        cmd.kick_mm_s = (aim.kick_speed * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16;
    }
    cmd
}

pub fn goalkeeper_target(ball: Vec2, line_x: f64, y_span: f64) -> Vec2 {
    let span = y_span.abs();
    Vec2::new(line_x, ball.y.clamp(-span, span))
}

pub fn goalkeeper(
    pose: &Pose,
    ball: Vec2,
    line_x: f64,
    y_span: f64,
    gains: &Gains,
    limits: &BridgeConfig,
) -> RobotCommand {
    go_to_point(pose, goalkeeper_target(ball, line_x, y_span), gains, limits)
}
