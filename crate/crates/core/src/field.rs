//! Deterministic fixed-timestep field: ball with flat rolling friction and
//! disc robots driven by their emulated servo banks.
//!
//! Field coordinates are metres with the origin at the centre spot, `x`
//! along the length and `y` along the width. One [`Field::step`] runs, in
//! order:
//!
//! 1. servo dynamics for every robot bus;
//! 2. robot twists from PresentVelocity via forward kinematics, rotated to
//!    the world frame and integrated with explicit Euler;
//! 3. ball integration with speed reduced by `ball_decel·dt` (never
//!    reversing), then dribbler capture;
//! 4. overlap resolution: robot–ball pushes the ball out, robot–robot
//!    splits the overlap equally;
//! 5. boundary check: a ball leaving the field is flagged and frozen;
//! 6. the clock advances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Pose, Vec2};
use crate::kicker::{KickerError, KickerParams, KickerState};
use crate::kinematics::{self, from_dxl_units, BodyTwist, KinematicsError, WheelConfig, WheelRates};
use crate::servo::VirtualBus;

/// Servo ids of the four drive motors, wheel order.
pub const DRIVE_IDS: [u8; 4] = [1, 2, 3, 4];

/// Upper bound on ball speed used for the tunneling check.
pub const MAX_BALL_SPEED: f64 = 6.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("robot {robot}: servo {servo} missing from its bus")]
    MissingServo { robot: u8, servo: u8 },
    #[error("no robot with id {0}")]
    UnknownRobot(u8),
    #[error("robot id {0} already on the field")]
    DuplicateRobot(u8),
    #[error("invalid field parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Kicker(#[from] KickerError),
    #[error("robot {robot}: bus fault {fault}")]
    Bus { robot: u8, fault: String },
    #[error("trace output: {0}")]
    Trace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldParams {
    pub length: f64,
    pub width: f64,
    /// m/s², applied to a moving ball only.
    pub ball_decel: f64,
    pub ball_radius: f64,
    pub robot_radius: f64,
    /// Half-width of the kick window around the robot heading, radians.
    pub kick_gate_angle: f64,
    /// Largest robot-surface to ball-surface gap that still kicks, metres.
    pub kick_gate_gap: f64,
    pub physics_dt: f64,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self {
            length: 9.0,
            width: 6.0,
            ball_decel: 0.35,
            ball_radius: 0.0215,
            robot_radius: 0.09,
            kick_gate_angle: 15f64.to_radians(),
            kick_gate_gap: 0.01,
            physics_dt: 0.001,
        }
    }
}

impl FieldParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            ("length", self.length),
            ("width", self.width),
            ("ball_decel", self.ball_decel),
            ("ball_radius", self.ball_radius),
            ("robot_radius", self.robot_radius),
            ("kick_gate_angle", self.kick_gate_angle),
            ("kick_gate_gap", self.kick_gate_gap),
            ("physics_dt", self.physics_dt),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.physics_dt > 0.002 {
            return Err(SimError::InvalidParams(format!(
                "physics_dt {} exceeds 2 ms",
                self.physics_dt
            )));
        }
        if MAX_BALL_SPEED * self.physics_dt >= self.ball_radius {
            return Err(SimError::InvalidParams(
                "ball could tunnel: max speed × dt ≥ ball radius".into(),
            ));
        }
        Ok(())
    }

    pub fn half_length(&self) -> f64 {
        self.length / 2.0
    }

    pub fn half_width(&self) -> f64 {
        self.width / 2.0
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x.abs() <= self.half_length() && p.y.abs() <= self.half_width()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub pos: Vec2,
    pub vel: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Robot {
    pub id: u8,
    pub pose: Pose,
    pub bus: VirtualBus,
    pub kicker: KickerState,
    pub last_command_time: f64,
    pub dribble: bool,
    /// World-frame linear velocity from the last step.
    pub velocity: Vec2,
}

impl Robot {
    pub fn new(id: u8, pose: Pose) -> Self {
        Self {
            id,
            pose,
            bus: VirtualBus::with_drive_servos(DRIVE_IDS).expect("drive ids are valid"),
            kicker: KickerState::default(),
            last_command_time: f64::NEG_INFINITY,
            dribble: false,
            velocity: Vec2::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    /// Physics ticks since start.
    pub tick: u64,
    pub t: f64,
    pub ball: Ball,
    pub robots: Vec<Robot>,
    pub out_of_bounds: bool,
}

/// Result of a kick attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickOutcome {
    /// Ball was inside the kick window.
    pub gate: bool,
    /// Speed given to the ball; 0 when the gate failed, the kicker was
    /// locked out or the capacitor was empty.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub params: FieldParams,
    pub wheels: WheelConfig,
    pub kicker: KickerParams,
    pub state: WorldState,
}

impl Field {
    pub fn new(params: FieldParams, wheels: WheelConfig, kicker: KickerParams) -> Result<Self, SimError> {
        params.validate()?;
        wheels.validate()?;
        kicker.validate()?;
        Ok(Self {
            params,
            wheels,
            kicker,
            state: WorldState {
                tick: 0,
                t: 0.0,
                ball: Ball::default(),
                robots: Vec::new(),
                out_of_bounds: false,
            },
        })
    }

    pub fn with_defaults() -> Self {
        Self::new(FieldParams::default(), WheelConfig::default(), KickerParams::default())
            .expect("defaults are valid")
    }

    pub fn add_robot(&mut self, id: u8, pose: Pose) -> Result<&mut Robot, SimError> {
        if self.state.robots.iter().any(|r| r.id == id) {
            return Err(SimError::DuplicateRobot(id));
        }
        self.state.robots.push(Robot::new(id, pose));
        Ok(self.state.robots.last_mut().expect("just pushed"))
    }

    pub fn place_ball(&mut self, pos: Vec2, vel: Vec2) {
        self.state.ball = Ball { pos, vel };
        self.state.out_of_bounds = !self.params.contains(pos);
    }

    pub fn robot(&self, id: u8) -> Result<&Robot, SimError> {
        self.state.robots.iter().find(|r| r.id == id).ok_or(SimError::UnknownRobot(id))
    }

    pub fn robot_mut(&mut self, id: u8) -> Result<&mut Robot, SimError> {
        self.state.robots.iter_mut().find(|r| r.id == id).ok_or(SimError::UnknownRobot(id))
    }

    pub fn t(&self) -> f64 {
        self.state.t
    }

    /// Advance one physics tick.
    pub fn step(&mut self) -> Result<(), SimError> {
        let dt = self.params.physics_dt;

        for robot in &mut self.state.robots {
            robot.bus.step(dt);
        }

        for robot in &mut self.state.robots {
            let twist = robot_twist_from_servos(robot, &self.wheels)?;
            let v_world = Vec2::new(twist.vx, twist.vy).rotated(robot.pose.theta);
            robot.velocity = v_world;
            robot.pose.x += v_world.x * dt;
            robot.pose.y += v_world.y * dt;
            robot.pose.theta = wrap_angle(robot.pose.theta + twist.omega * dt);
        }

        if !self.state.out_of_bounds {
            self.integrate_ball(dt);
            self.apply_dribblers();
            self.resolve_ball_contacts();
        }
        self.resolve_robot_contacts();
        for robot in &mut self.state.robots {
            clamp_to_field(&mut robot.pose, &self.params);
        }

        let ball = &mut self.state.ball;
        if !self.params.contains(ball.pos) {
            self.state.out_of_bounds = true;
        }
        if self.state.out_of_bounds {
            ball.vel = Vec2::ZERO;
        }

        self.state.tick += 1;
        self.state.t = self.state.tick as f64 * dt;
        Ok(())
    }

    fn integrate_ball(&mut self, dt: f64) {
        let ball = &mut self.state.ball;
        let speed = ball.vel.norm();
        if speed == 0.0 {
            return;
        }
        let slowed = (speed - self.params.ball_decel * dt).max(0.0);
        let new_vel = ball.vel * (slowed / speed);
        ball.pos += (ball.vel + new_vel) * (0.5 * dt);
        ball.vel = new_vel;
    }

    fn apply_dribblers(&mut self) {
        let params = self.params;
        for robot in self.state.robots.iter().filter(|r| r.dribble) {
            if in_kick_gate(robot, &self.state.ball, &params) {
                self.state.ball.vel = robot.velocity;
            }
        }
    }

    fn resolve_ball_contacts(&mut self) {
        let min_dist = self.params.robot_radius + self.params.ball_radius;
        let ball = &mut self.state.ball;
        for robot in &self.state.robots {
            let offset = ball.pos - robot.pose.position();
            let dist = offset.norm();
            if dist >= min_dist {
                continue;
            }
            let normal = offset.normalized().unwrap_or_else(|| robot.pose.heading());
            ball.pos = robot.pose.position() + normal * min_dist;
            let closing = robot.velocity.dot(normal) - ball.vel.dot(normal);
            if closing > 0.0 {
                ball.vel += normal * closing;
            }
        }
    }

    fn resolve_robot_contacts(&mut self) {
        let min_dist = 2.0 * self.params.robot_radius;
        let robots = &mut self.state.robots;
        for i in 0..robots.len() {
            for j in i + 1..robots.len() {
                let offset = robots[j].pose.position() - robots[i].pose.position();
                let dist = offset.norm();
                if dist >= min_dist {
                    continue;
                }
                let normal = offset.normalized().unwrap_or(Vec2::new(1.0, 0.0));
                let push = normal * (0.5 * (min_dist - dist));
                robots[i].pose.x -= push.x;
                robots[i].pose.y -= push.y;
                robots[j].pose.x += push.x;
                robots[j].pose.y += push.y;
            }
        }
    }

    /// Try to kick with robot `robot_id`; the ball gets at most `speed_cap` m/s.
    pub fn attempt_kick(&mut self, robot_id: u8, speed_cap: f64) -> Result<KickOutcome, SimError> {
        let now = self.state.t;
        let params = self.params;
        let kicker_params = self.kicker;
        let ball = self.state.ball;
        let out = self.state.out_of_bounds;
        let robot = self.robot_mut(robot_id)?;
        if out || !in_kick_gate(robot, &ball, &params) {
            return Ok(KickOutcome {
                gate: false,
                speed: 0.0,
            });
        }
        let delivered = robot.kicker.trigger(&kicker_params, now).min(speed_cap.max(0.0));
        let heading = robot.pose.heading();
        if delivered > 0.0 {
            self.state.ball.vel = heading * delivered;
        }
        Ok(KickOutcome {
            gate: true,
            speed: delivered,
        })
    }
}

/// Whether the ball sits in the kicker mouth of `robot`.
pub fn in_kick_gate(robot: &Robot, ball: &Ball, params: &FieldParams) -> bool {
    let offset = ball.pos - robot.pose.position();
    let gap = offset.norm() - params.robot_radius - params.ball_radius;
    if gap > params.kick_gate_gap {
        return false;
    }
    let bearing = wrap_angle(offset.angle() - robot.pose.theta);
    bearing.abs() <= params.kick_gate_angle
}

/// Robot-frame twist implied by the PresentVelocity of the drive servos.
pub fn robot_twist_from_servos(robot: &Robot, wheels: &WheelConfig) -> Result<BodyTwist, SimError> {
    let mut rates = [0.0; 4];
    for (rate, id) in rates.iter_mut().zip(DRIVE_IDS) {
        let servo = robot.bus.servo(id).ok_or(SimError::MissingServo {
            robot: robot.id,
            servo: id,
        })?;
        *rate = from_dxl_units(servo.present_velocity());
    }
    Ok(kinematics::forward(&WheelRates(rates), wheels)?)
}

fn clamp_to_field(pose: &mut Pose, params: &FieldParams) {
    let hx = params.half_length() + params.robot_radius;
    let hy = params.half_width() + params.robot_radius;
    pose.x = pose.x.clamp(-hx, hx);
    pose.y = pose.y.clamp(-hy, hy);
}
