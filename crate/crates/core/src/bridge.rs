//! Per-robot controller between the command wire and the servo bus.
//!
//! Each control tick the bridge takes the newest command for its robot,
//! clamps and slew-limits it, applies the staleness watchdog, fans the twist
//! out to the four drive servos as one SYNC_WRITE frame, runs the charger and
//! routes kick requests to the field.

use serde::{Deserialize, Serialize};

use crate::field::{Field, KickOutcome, SimError, DRIVE_IDS};
use crate::geometry::Vec2;
use crate::kinematics::{inverse, to_dxl_units, BodyTwist, WheelConfig};
use crate::net::RobotCommand;
use crate::protocol::InstructionPacket;
use crate::servo::table::ADDR_GOAL_VELOCITY;

/// Angular acceleration limit per unit of linear limit (rad/s² per m/s²).
pub const ANGULAR_ACCEL_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeConfig {
    pub v_max: f64,
    pub omega_max: f64,
    pub accel_max: f64,
    pub staleness_timeout: f64,
    pub kick_cap: f64,
    pub control_dt: f64,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            v_max: 3.0,
            omega_max: 10.0,
            accel_max: 4.0,
            staleness_timeout: 0.2,
            kick_cap: 6.5,
            control_dt: 0.01,
        }
    }
}

impl BridgeConfig {
    pub fn validate(&self, physics_dt: f64) -> Result<(), SimError> {
        let fields = [
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("accel_max", self.accel_max),
            ("staleness_timeout", self.staleness_timeout),
            ("kick_cap", self.kick_cap),
            ("control_dt", self.control_dt),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        let ratio = self.control_dt / physics_dt;
        if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(SimError::InvalidParams(format!(
                "control_dt {} is not a whole multiple of physics_dt {physics_dt}",
                self.control_dt
            )));
        }
        Ok(())
    }

    pub fn angular_accel_max(&self) -> f64 {
        self.accel_max * ANGULAR_ACCEL_RATIO
    }

    /// Physics steps per control tick.
    pub fn substeps(&self, physics_dt: f64) -> u32 {
        (self.control_dt / physics_dt).round() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeState {
    /// Post-filter twist last sent to the wheels.
    pub last_twist: BodyTwist,
    /// Clamped request the slew limiter is heading for.
    pub target: BodyTwist,
    pub last_rx_time: f64,
    pub charger_enabled: bool,
    pub dribble: bool,
}

impl Default for BridgeState {
    fn default() -> Self {
        Self {
            last_twist: BodyTwist::ZERO,
            target: BodyTwist::ZERO,
            last_rx_time: f64::NEG_INFINITY,
            charger_enabled: false,
            dribble: false,
        }
    }
}

fn clamp_twist(t: BodyTwist, cfg: &BridgeConfig) -> BodyTwist {
    let lin = Vec2::new(t.vx, t.vy).clamp_norm(cfg.v_max);
    BodyTwist::new(lin.x, lin.y, t.omega.clamp(-cfg.omega_max, cfg.omega_max))
}

/// Move `state.last_twist` one control tick towards `state.target`.
fn slew(state: &mut BridgeState, cfg: &BridgeConfig) -> BodyTwist {
    let last = state.last_twist;
    let step = (Vec2::new(state.target.vx, state.target.vy) - Vec2::new(last.vx, last.vy))
        .clamp_norm(cfg.accel_max * cfg.control_dt);
    let max_dw = cfg.angular_accel_max() * cfg.control_dt;
    let dw = (state.target.omega - last.omega).clamp(-max_dw, max_dw);
    // Both endpoints are within limits and the disc is convex, so the
    // result is too; the clamp only absorbs rounding.
    let out = clamp_twist(BodyTwist::new(last.vx + step.x, last.vy + step.y, last.omega + dw), cfg);
    state.last_twist = out;
    out
}

/// Wire command to SI, clamped to the limits, then slewed from the last output.
pub fn filter_command(cmd: &RobotCommand, state: &mut BridgeState, cfg: &BridgeConfig, now: f64) -> BodyTwist {
    let requested = BodyTwist::new(
        cmd.vx_mm_s as f64 / 1000.0,
        cmd.vy_mm_s as f64 / 1000.0,
        cmd.omega_mrad_s as f64 / 1000.0,
    );
    state.target = clamp_twist(requested, cfg);
    state.last_rx_time = now;
    state.charger_enabled = cmd.charge();
    state.dribble = cmd.dribble();
    slew(state, cfg)
}

/// Zeroes the output and disables the charger once commands go stale.
/// Returns whether the watchdog tripped.
pub fn watchdog_check(state: &mut BridgeState, cfg: &BridgeConfig, now: f64) -> bool {
    if now - state.last_rx_time > cfg.staleness_timeout {
        state.last_twist = BodyTwist::ZERO;
        state.target = BodyTwist::ZERO;
        state.charger_enabled = false;
        state.dribble = false;
        true
    } else {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WheelFrame {
    pub bytes: Vec<u8>,
    pub units: [i32; 4],
    /// At least one wheel hit the servo velocity limit.
    pub saturated: bool,
}

/// GoalVelocity SYNC_WRITE for the drive servos.
pub fn command_to_sync_write(twist: BodyTwist, wheels: &WheelConfig) -> WheelFrame {
    let rates = inverse(twist, wheels);
    let mut units = [0i32; 4];
    let mut saturated = false;
    for (u, rate) in units.iter_mut().zip(rates.0) {
        let d = to_dxl_units(rate);
        *u = d.units;
        saturated |= d.saturated;
    }
    let data: Vec<[u8; 4]> = units.iter().map(|u| u.to_le_bytes()).collect();
    let packet = InstructionPacket::sync_write(
        ADDR_GOAL_VELOCITY,
        4,
        DRIVE_IDS.iter().zip(&data).map(|(id, d)| (*id, d.as_slice())),
    );
    WheelFrame {
        bytes: packet.encode().expect("four entries fit any frame"),
        units,
        saturated,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickReport {
    pub twist: BodyTwist,
    pub units: [i32; 4],
    pub saturated: bool,
    pub watchdog_tripped: bool,
    pub kick: Option<KickOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bridge {
    pub robot_id: u8,
    pub cfg: BridgeConfig,
    pub state: BridgeState,
    pending: Option<RobotCommand>,
}

impl Bridge {
    pub fn new(robot_id: u8, cfg: BridgeConfig) -> Self {
        Self {
            robot_id,
            cfg,
            state: BridgeState::default(),
            pending: None,
        }
    }

    /// Queue a command; a later one in the same tick replaces it.
    pub fn receive(&mut self, cmd: RobotCommand) {
        debug_assert_eq!(cmd.robot_id, self.robot_id);
        self.pending = Some(cmd);
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }

    /// One control tick at the field's current time. Does not step physics.
    pub fn process_tick(&mut self, field: &mut Field) -> Result<TickReport, SimError> {
        let now = field.t();
        let cmd = self.pending.take();
        match &cmd {
            Some(c) => {
                filter_command(c, &mut self.state, &self.cfg, now);
            }
            None => {
                slew(&mut self.state, &self.cfg);
            }
        }
        let tripped = watchdog_check(&mut self.state, &self.cfg, now);

        let frame = command_to_sync_write(self.state.last_twist, &field.wheels);
        let kicker_params = field.kicker;
        let robot = field.robot_mut(self.robot_id)?;
        robot.bus.transact(&frame.bytes);
        if let Some(fault) = robot.bus.take_faults().into_iter().next() {
            return Err(SimError::Bus {
                robot: self.robot_id,
                fault: format!("{fault:?}"),
            });
        }
        robot.last_command_time = self.state.last_rx_time;
        robot.dribble = self.state.dribble;
        robot.kicker.charging = self.state.charger_enabled;
        robot.kicker.charge_step(&kicker_params, now, self.cfg.control_dt);

        let kick = match cmd {
            Some(c) if c.kick_mm_s > 0 && !tripped => {
                let requested = c.kick_mm_s as f64 / 1000.0;
                Some(field.attempt_kick(self.robot_id, requested.min(self.cfg.kick_cap))?)
            }
            _ => None,
        };

        Ok(TickReport {
            twist: self.state.last_twist,
            units: frame.units,
            saturated: frame.saturated,
            watchdog_tripped: tripped,
            kick,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use crate::protocol::{decode_frame, Instruction, Packet};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cmd(vx: i16, vy: i16, omega: i16) -> RobotCommand {
        RobotCommand {
            robot_id: 0,
            vx_mm_s: vx,
            vy_mm_s: vy,
            omega_mrad_s: omega,
            ..Default::default()
        }
    }

    fn decoded_units(bytes: &[u8]) -> Vec<(u8, i32)> {
        let Packet::Instruction(p) = decode_frame(bytes).unwrap() else {
            panic!("not an instruction");
        };
        assert_eq!(p.instruction, Instruction::SyncWrite);
        assert_eq!(&p.params[..4], &[104, 0, 4, 0]);
        p.params[4..]
            .chunks(5)
            .map(|c| (c[0], i32::from_le_bytes([c[1], c[2], c[3], c[4]])))
            .collect()
    }

    #[test]
    fn first_tick_from_rest_is_slew_limited() {
        let cfg = BridgeConfig::default();
        let mut s = BridgeState::default();
        let out = filter_command(&cmd(10_000, 0, 0), &mut s, &cfg, 0.0);
        assert!((out.vx - 0.04).abs() < 1e-12);
        assert_eq!(out.vy, 0.0);
        assert_eq!(s.target.vx, 3.0);
    }

    #[test]
    fn planar_clamp_preserves_direction() {
        let cfg = BridgeConfig::default();
        let mut s = BridgeState::default();
        let mut out = BodyTwist::ZERO;
        for k in 0..200 {
            out = filter_command(&cmd(4000, 3000, 0), &mut s, &cfg, k as f64 * 0.01);
        }
        assert!((out.linear_speed() - 3.0).abs() < 1e-12);
        assert!((out.vx - 2.4).abs() < 1e-12);
        assert!((out.vy - 1.8).abs() < 1e-12);
    }

    #[test]
    fn settled_command_is_idempotent() {
        let cfg = BridgeConfig::default();
        let mut s = BridgeState::default();
        let c = cmd(1500, -700, 2000);
        for k in 0..100 {
            filter_command(&c, &mut s, &cfg, k as f64 * 0.01);
        }
        let a = filter_command(&c, &mut s, &cfg, 1.0);
        let b = filter_command(&c, &mut s, &cfg, 1.01);
        assert_eq!(a, b);
        assert_eq!(a, BodyTwist::new(1.5, -0.7, 2.0));
    }

    #[test]
    fn angular_slew_rate() {
        let cfg = BridgeConfig::default();
        let mut s = BridgeState::default();
        let out = filter_command(&cmd(0, 0, 10_000), &mut s, &cfg, 0.0);
        assert!((out.omega - 0.4).abs() < 1e-12);
    }

    #[test]
    fn watchdog_boundaries() {
        let cfg = BridgeConfig::default();
        let mut s = BridgeState {
            last_rx_time: 1.0,
            last_twist: BodyTwist::new(1.0, 0.0, 0.0),
            charger_enabled: true,
            ..BridgeState::default()
        };
        assert!(!watchdog_check(&mut s, &cfg, 1.05));
        assert!(!watchdog_check(&mut s, &cfg, 1.2));
        assert_eq!(s.last_twist.vx, 1.0);
        assert!(watchdog_check(&mut s, &cfg, 1.3));
        assert_eq!(s.last_twist, BodyTwist::ZERO);
        assert!(!s.charger_enabled);
    }

    #[test]
    fn zero_twist_frame() {
        let f = command_to_sync_write(BodyTwist::ZERO, &WheelConfig::default());
        assert!(!f.saturated);
        assert_eq!(decoded_units(&f.bytes), vec![(1, 0), (2, 0), (3, 0), (4, 0)]);
    }

    #[test]
    fn spin_frame_units() {
        // Unit oracle: rad/s → rpm → 0.229 rpm steps.
        let units = |rate: f64| (rate * 60.0 / (2.0 * PI) / 0.229).round() as i32;
        let paper = WheelConfig {
            gear_ratio: 1.5,
            ..WheelConfig::default()
        };
        let rate = 0.08 / (0.027 * 1.5);
        assert_eq!(units(rate), 82);
        let f = command_to_sync_write(BodyTwist::new(0.0, 0.0, 1.0), &paper);
        assert_eq!(decoded_units(&f.bytes), vec![(1, 82), (2, 82), (3, 82), (4, 82)]);

        let geared = WheelConfig::default();
        let rate = 0.08 / (0.027 * geared.gear_ratio);
        let f = command_to_sync_write(BodyTwist::new(0.0, 0.0, 1.0), &geared);
        assert_eq!(f.units, [units(rate); 4]);
    }

    #[test]
    fn saturated_frame() {
        let f = command_to_sync_write(BodyTwist::new(3.0, 0.0, 10.0), &WheelConfig::default());
        assert!(f.saturated);
        assert!(f.units.iter().any(|u| u.abs() == 265));
        let got = decoded_units(&f.bytes);
        assert_eq!(got.iter().map(|(_, u)| *u).collect::<Vec<_>>(), f.units.to_vec());
    }

    #[test]
    fn frames_are_byte_deterministic() {
        let t = BodyTwist::new(1.234, -0.5, 3.3);
        let w = WheelConfig::default();
        assert_eq!(command_to_sync_write(t, &w).bytes, command_to_sync_write(t, &w).bytes);
    }

    fn run_ticks(field: &mut Field, bridge: &mut Bridge, n: usize, c: Option<RobotCommand>) -> TickReport {
        let substeps = bridge.cfg.substeps(field.params.physics_dt);
        let mut last = None;
        for _ in 0..n {
            if let Some(c) = c {
                bridge.receive(c);
            }
            last = Some(bridge.process_tick(field).unwrap());
            for _ in 0..substeps {
                field.step().unwrap();
            }
        }
        last.unwrap()
    }

    #[test]
    fn silent_bridge_holds_zero_goals() {
        let mut field = Field::with_defaults();
        field.add_robot(0, Pose::new(0.0, 0.0, 0.0)).unwrap();
        let mut bridge = Bridge::new(0, BridgeConfig::default());
        let r = run_ticks(&mut field, &mut bridge, 50, None);
        assert!(r.watchdog_tripped);
        assert_eq!(r.units, [0; 4]);
        let robot = field.robot(0).unwrap();
        assert!(robot.bus.servos().all(|s| s.goal_velocity() == 0 && s.velocity() == 0.0));
        assert_eq!(robot.pose, Pose::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn full_forward_reaches_speed_in_time() {
        let cfg = BridgeConfig::default();
        let mut field = Field::with_defaults();
        field.add_robot(0, Pose::new(-4.0, 0.0, 0.0)).unwrap();
        let mut bridge = Bridge::new(0, cfg);
        let bound = cfg.v_max / cfg.accel_max + 0.2;
        let ticks = (bound / cfg.control_dt).round() as usize;
        run_ticks(&mut field, &mut bridge, ticks, Some(cmd(i16::MAX, 0, 0)));
        let v = field.robot(0).unwrap().velocity.norm();
        assert!(v >= 0.95 * cfg.v_max, "speed {v} after {bound} s");
    }

    #[test]
    fn uncharged_kick_passes_gate_with_zero_speed() {
        let mut field = Field::with_defaults();
        field.add_robot(0, Pose::new(0.0, 0.0, 0.0)).unwrap();
        let r = field.params.robot_radius + field.params.ball_radius + 0.005;
        field.place_ball(Vec2::new(r, 0.0), Vec2::ZERO);
        let mut bridge = Bridge::new(0, BridgeConfig::default());
        bridge.receive(RobotCommand {
            kick_mm_s: 5000,
            ..Default::default()
        });
        let rep = bridge.process_tick(&mut field).unwrap();
        assert_eq!(rep.kick, Some(KickOutcome { gate: true, speed: 0.0 }));
        assert_eq!(field.state.ball.vel, Vec2::ZERO);
    }

    #[test]
    fn kick_capped_and_charger_follows_flag() {
        let mut field = Field::with_defaults();
        field.add_robot(0, Pose::new(0.0, 0.0, 0.0)).unwrap();
        let r = field.params.robot_radius + field.params.ball_radius;
        field.place_ball(Vec2::new(r, 0.0), Vec2::ZERO);
        let cfg = BridgeConfig {
            kick_cap: 2.0,
            ..BridgeConfig::default()
        };
        let mut bridge = Bridge::new(0, cfg);
        let charge = RobotCommand {
            flags: crate::net::FLAG_CHARGE,
            ..Default::default()
        };
        run_ticks(&mut field, &mut bridge, 100, Some(charge));
        let v_cap = field.robot(0).unwrap().kicker.v_cap;
        assert_eq!(v_cap, field.kicker.v_max);
        field.place_ball(Vec2::new(r, 0.0), Vec2::ZERO);
        bridge.receive(RobotCommand {
            kick_mm_s: 6000,
            flags: crate::net::FLAG_CHARGE,
            ..Default::default()
        });
        let rep = bridge.process_tick(&mut field).unwrap();
        assert_eq!(rep.kick.unwrap().speed, 2.0);
        assert!((field.state.ball.vel.x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn absent_drive_servo_is_a_sim_fault() {
        let mut field = Field::with_defaults();
        field.add_robot(0, Pose::new(0.0, 0.0, 0.0)).unwrap();
        field.robot_mut(0).unwrap().bus = crate::servo::VirtualBus::with_drive_servos([1, 2, 3]).unwrap();
        let mut bridge = Bridge::new(0, BridgeConfig::default());
        // SYNC_WRITE skips absent ids silently; the gap shows up in physics.
        assert!(bridge.process_tick(&mut field).is_ok());
        assert!(matches!(field.step(), Err(SimError::MissingServo { servo: 4, .. })));
    }

    proptest! {
        #[test]
        fn output_within_limits_and_watchdog_zero(
            stream in prop::collection::vec((any::<i16>(), any::<i16>(), any::<i16>(), any::<bool>()), 1..200),
            stop_at in 0usize..200,
        ) {
            let cfg = BridgeConfig::default();
            let mut s = BridgeState::default();
            let stop_at = stop_at.min(stream.len());
            let mut last_rx = f64::NEG_INFINITY;
            for k in 0..stream.len() + 40 {
                let now = k as f64 * cfg.control_dt;
                if let Some(&(vx, vy, w, present)) = stream[..stop_at].get(k) {
                    if present {
                        filter_command(&cmd(vx, vy, w), &mut s, &cfg, now);
                        last_rx = now;
                    } else {
                        slew(&mut s, &cfg);
                    }
                } else {
                    slew(&mut s, &cfg);
                }
                watchdog_check(&mut s, &cfg, now);
                let t = s.last_twist;
                prop_assert!(t.linear_speed() <= cfg.v_max + 1e-12);
                prop_assert!(t.omega.abs() <= cfg.omega_max + 1e-12);
                if now - last_rx > cfg.staleness_timeout {
                    prop_assert_eq!(t, BodyTwist::ZERO);
                }
            }
        }
    }
}
