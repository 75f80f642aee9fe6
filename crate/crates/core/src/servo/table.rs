//! XL430-class control table.
//!
//! | Address | Name             | Size | Access | Range       |
//! |---------|------------------|------|--------|-------------|
//! | 7       | ID               | 1    | EEPROM | 0..=252     |
//! | 11      | Operating Mode   | 1    | EEPROM | 0..=16      |
//! | 64      | Torque Enable    | 1    | RW     | 0..=1       |
//! | 100     | Goal PWM         | 2    | RW     | -885..=885  |
//! | 104     | Goal Velocity    | 4    | RW     | -265..=265  |
//! | 116     | Goal Position    | 4    | RW     | 0..=4095    |
//! | 128     | Present Velocity | 4    | R      |             |
//! | 132     | Present Position | 4    | R      |             |

use thiserror::Error;

use crate::protocol::status_error;

pub const ADDR_ID: u16 = 7;
pub const ADDR_OPERATING_MODE: u16 = 11;
pub const ADDR_TORQUE_ENABLE: u16 = 64;
pub const ADDR_GOAL_PWM: u16 = 100;
pub const ADDR_GOAL_VELOCITY: u16 = 104;
pub const ADDR_GOAL_POSITION: u16 = 116;
pub const ADDR_PRESENT_VELOCITY: u16 = 128;
pub const ADDR_PRESENT_POSITION: u16 = 132;

/// Velocity register limit, in 0.229 rpm units.
pub const VELOCITY_LIMIT: i64 = 265;
pub const POSITION_MAX: i64 = 4095;
pub const PWM_LIMIT: i64 = 885;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    ReadOnly,
    ReadWrite,
    /// Writable only while torque is disabled.
    Eeprom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Register {
    pub name: &'static str,
    pub addr: u16,
    pub size: u16,
    pub access: Access,
    pub signed: bool,
    pub min: i64,
    pub max: i64,
    pub default: i64,
}

impl Register {
    pub fn span(&self) -> std::ops::Range<u16> {
        self.addr..self.addr + self.size
    }

    pub fn clamp(&self, value: i64) -> i64 {
        value.clamp(self.min, self.max)
    }

    pub fn encode(&self, value: i64) -> Vec<u8> {
        value.to_le_bytes()[..self.size as usize].to_vec()
    }

    /// Interpret little-endian `data`, which must be exactly `size` bytes.
    pub fn decode(&self, data: &[u8]) -> i64 {
        let mut raw = [0u8; 8];
        raw[..data.len()].copy_from_slice(data);
        let unsigned = u64::from_le_bytes(raw);
        if self.signed {
            let shift = 64 - 8 * data.len() as u32;
            ((unsigned << shift) as i64) >> shift
        } else {
            unsigned as i64
        }
    }
}

const fn reg(
    name: &'static str,
    addr: u16,
    size: u16,
    access: Access,
    signed: bool,
    min: i64,
    max: i64,
) -> Register {
    Register {
        name,
        addr,
        size,
        access,
        signed,
        min,
        max,
        default: 0,
    }
}

/// Sorted by address.
pub static REGISTERS: [Register; 8] = [
    reg("ID", ADDR_ID, 1, Access::Eeprom, false, 0, 252),
    Register {
        default: 3,
        ..reg("OperatingMode", ADDR_OPERATING_MODE, 1, Access::Eeprom, false, 0, 16)
    },
    reg("TorqueEnable", ADDR_TORQUE_ENABLE, 1, Access::ReadWrite, false, 0, 1),
    reg("GoalPwm", ADDR_GOAL_PWM, 2, Access::ReadWrite, true, -PWM_LIMIT, PWM_LIMIT),
    reg("GoalVelocity", ADDR_GOAL_VELOCITY, 4, Access::ReadWrite, true, -VELOCITY_LIMIT, VELOCITY_LIMIT),
    reg("GoalPosition", ADDR_GOAL_POSITION, 4, Access::ReadWrite, true, 0, POSITION_MAX),
    reg("PresentVelocity", ADDR_PRESENT_VELOCITY, 4, Access::ReadOnly, true, -VELOCITY_LIMIT, VELOCITY_LIMIT),
    reg("PresentPosition", ADDR_PRESENT_POSITION, 4, Access::ReadOnly, true, i32::MIN as i64, i32::MAX as i64),
];

/// Register whose span is exactly `[addr, addr + len)`.
pub fn lookup(addr: u16, len: u16) -> Result<(usize, &'static Register), TableError> {
    REGISTERS
        .iter()
        .enumerate()
        .find(|(_, r)| r.addr == addr && r.size == len)
        .ok_or(TableError::DataLength { addr, len })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("no register spans [{addr}, {addr}+{len})")]
    DataLength { addr: u16, len: u16 },
    #[error("register at {addr} is not writable now")]
    Access { addr: u16 },
    #[error("value rejected for register at {addr}")]
    DataLimit { addr: u16 },
}

impl TableError {
    /// Status error byte a servo reports for this failure.
    pub fn status_bits(&self) -> u8 {
        match self {
            TableError::DataLength { .. } => status_error::DATA_LENGTH,
            TableError::Access { .. } => status_error::ACCESS,
            TableError::DataLimit { .. } => status_error::DATA_LIMIT,
        }
    }
}

/// Stored register values, indexed like [`REGISTERS`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlTable {
    values: [i64; REGISTERS.len()],
}

impl Default for ControlTable {
    fn default() -> Self {
        let mut values = [0; REGISTERS.len()];
        for (v, r) in values.iter_mut().zip(REGISTERS.iter()) {
            *v = r.default;
        }
        Self { values }
    }
}

impl ControlTable {
    pub fn get(&self, addr: u16) -> Option<i64> {
        REGISTERS
            .iter()
            .position(|r| r.addr == addr)
            .map(|i| self.values[i])
    }

    pub(crate) fn get_index(&self, index: usize) -> i64 {
        self.values[index]
    }

    /// Store `value` clamped to the register's range. Returns the stored value.
    pub(crate) fn set_index(&mut self, index: usize, value: i64) -> i64 {
        let v = REGISTERS[index].clamp(value);
        self.values[index] = v;
        v
    }

    pub(crate) fn set(&mut self, addr: u16, value: i64) -> i64 {
        let index = REGISTERS
            .iter()
            .position(|r| r.addr == addr)
            .expect("known register address");
        self.set_index(index, value)
    }
}
