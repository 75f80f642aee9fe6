//! Samples the simulated world into vision frames on the control clock.

use crate::field::WorldState;

use super::codec::{VisionFrame, VisionRobot, MAX_VISION_ROBOTS};

pub const DEFAULT_VISION_RATE: f64 = 60.0;

// Absorbs accumulated floating error in tick·dt.
const SAMPLE_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct VisionPublisher {
    period: f64,
    next_sample: u64,
    next_frame: u32,
}

impl Default for VisionPublisher {
    fn default() -> Self {
        Self::new(DEFAULT_VISION_RATE)
    }
}

impl VisionPublisher {
    /// Panics on a non-positive or non-finite rate.
    pub fn new(rate_hz: f64) -> Self {
        assert!(rate_hz.is_finite() && rate_hz > 0.0, "vision rate must be positive");
        Self {
            period: 1.0 / rate_hz,
            next_sample: 0,
            next_frame: 0,
        }
    }

    pub fn frames_emitted(&self) -> u32 {
        self.next_frame
    }

    /// Called once per control tick. Emits at most one frame; sample instants
    /// missed between polls are skipped rather than replayed.
    pub fn poll(&mut self, world: &WorldState) -> Option<VisionFrame> {
        let due = self.next_sample as f64 * self.period;
        if world.t + SAMPLE_EPS < due {
            return None;
        }
        let frame = snapshot(world, self.next_frame);
        self.next_frame = self.next_frame.wrapping_add(1);
        self.next_sample = ((world.t + SAMPLE_EPS) / self.period).floor() as u64 + 1;
        Some(frame)
    }
}

/// Ground-truth frame for the current world state, quantized to mm and mrad.
pub fn snapshot(world: &WorldState, frame_no: u32) -> VisionFrame {
    VisionFrame {
        frame_no,
        t_us: (world.t * 1e6).round() as u64,
        ball_x_mm: to_mm(world.ball.pos.x),
        ball_y_mm: to_mm(world.ball.pos.y),
        robots: world
            .robots
            .iter()
            .take(MAX_VISION_ROBOTS)
            .map(|r| VisionRobot {
                id: r.id,
                x_mm: to_mm(r.pose.x),
                y_mm: to_mm(r.pose.y),
                theta_mrad: (r.pose.theta * 1000.0).round() as i16,
            })
            .collect(),
    }
}

fn to_mm(m: f64) -> i32 {
    (m * 1000.0).round() as i32
}
