//! Command and vision datagrams plus their transports.

pub mod codec;
pub mod publisher;
pub mod transport;

pub use codec::{
    RobotCommand, VisionFrame, VisionRobot, WireError, COMMAND_LEN, FLAG_CHARGE, FLAG_DRIBBLE,
    MAX_VISION_ROBOTS,
};
pub use publisher::{snapshot, VisionPublisher, DEFAULT_VISION_RATE};
pub use transport::{
    CommandQueue, CommandSender, UdpCommandListener, UdpVisionSender, DEFAULT_COMMAND_PORT,
    DEFAULT_VISION_PORT,
};
