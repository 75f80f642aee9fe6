//! Hardware-free robot-soccer stack: a servo-bus wire protocol and servo
//! emulation, omni-wheel kinematics, a capacitor kicker, a fixed-step field
//! simulator, UDP command/vision codecs, the per-robot bridge and a scenario
//! harness.

pub mod bridge;
pub mod field;
pub mod geometry;
pub mod kicker;
pub mod kinematics;
pub mod net;
pub mod protocol;
pub mod servo;
pub mod sim;
pub mod tactics;
pub mod trace;

pub use bridge::{Bridge, BridgeConfig};
pub use field::{Field, FieldParams, SimError, WorldState};
pub use geometry::{Pose, Vec2};
pub use kicker::{KickerParams, KickerState};
pub use kinematics::{BodyTwist, WheelConfig};
pub use net::{RobotCommand, VisionFrame};
pub use protocol::{InstructionPacket, Packet, ProtocolError, StatusPacket};
pub use servo::VirtualBus;
pub use sim::{SimConfig, Simulation};
pub use tactics::{run_scenario, MetricsReport, Scenario, ScenarioConfig};
