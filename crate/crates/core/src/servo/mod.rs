//! Emulated XL430-class servos on a virtual half-duplex bus.

mod bus;
mod state;
pub mod table;

pub use bus::{BusError, BusFault, VirtualBus, FIRMWARE_VERSION, MODEL_NUMBER};
pub use state::{
    OperatingMode, ServoState, ACCEL_LIMIT, TICKS_PER_REV, TICKS_PER_SEC_PER_UNIT, VELOCITY_UNIT_RPM,
};
pub use table::{ControlTable, TableError, VELOCITY_LIMIT};
