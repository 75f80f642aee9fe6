use super::table::{
    lookup, Access, ControlTable, TableError, ADDR_GOAL_POSITION, ADDR_GOAL_VELOCITY, ADDR_ID,
    ADDR_OPERATING_MODE, ADDR_PRESENT_POSITION, ADDR_PRESENT_VELOCITY, ADDR_TORQUE_ENABLE,
    POSITION_MAX, REGISTERS, VELOCITY_LIMIT,
};

/// One velocity unit, in rpm.
pub const VELOCITY_UNIT_RPM: f64 = 0.229;
pub const TICKS_PER_REV: f64 = 4096.0;
/// Encoder ticks per second produced by one velocity unit.
pub const TICKS_PER_SEC_PER_UNIT: f64 = VELOCITY_UNIT_RPM * TICKS_PER_REV / 60.0;
/// Velocity slew limit, units per second.
pub const ACCEL_LIMIT: f64 = 2000.0;

const VELOCITY_LIMIT_F: f64 = VELOCITY_LIMIT as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatingMode {
    Velocity,
    Position,
    /// Stored but not modeled (PWM, extended position, current).
    Other(u8),
}

impl From<i64> for OperatingMode {
    fn from(v: i64) -> Self {
        match v {
            1 => OperatingMode::Velocity,
            3 => OperatingMode::Position,
            other => OperatingMode::Other(other as u8),
        }
    }
}

impl OperatingMode {
    pub fn register_value(self) -> i64 {
        match self {
            OperatingMode::Velocity => 1,
            OperatingMode::Position => 3,
            OperatingMode::Other(v) => v as i64,
        }
    }
}

/// Emulated servo: register map plus continuous motor state.
#[derive(Debug, Clone, PartialEq)]
pub struct ServoState {
    table: ControlTable,
    /// Encoder ticks; wrapped to [0, 4096) in velocity mode.
    position: f64,
    /// Velocity units (0.229 rpm).
    velocity: f64,
}

impl ServoState {
    pub fn new(id: u8) -> Self {
        debug_assert!(id <= 252, "servo id {id} out of range");
        let mut table = ControlTable::default();
        table.set(ADDR_ID, id as i64);
        Self {
            table,
            position: 0.0,
            velocity: 0.0,
        }
    }

    /// A servo configured the way the drive train runs it: velocity mode, torque on.
    pub fn drive_wheel(id: u8) -> Self {
        let mut servo = Self::new(id);
        servo.table.set(ADDR_OPERATING_MODE, OperatingMode::Velocity.register_value());
        servo.table.set(ADDR_TORQUE_ENABLE, 1);
        servo
    }

    pub fn id(&self) -> u8 {
        self.table.get(ADDR_ID).unwrap_or_default() as u8
    }

    pub fn torque_on(&self) -> bool {
        self.table.get(ADDR_TORQUE_ENABLE) == Some(1)
    }

    pub fn mode(&self) -> OperatingMode {
        OperatingMode::from(self.table.get(ADDR_OPERATING_MODE).unwrap_or_default())
    }

    pub fn goal_velocity(&self) -> i64 {
        self.table.get(ADDR_GOAL_VELOCITY).unwrap_or_default()
    }

    pub fn goal_position(&self) -> i64 {
        self.table.get(ADDR_GOAL_POSITION).unwrap_or_default()
    }

    pub fn position(&self) -> f64 {
        self.position
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    /// PresentVelocity register: continuous velocity rounded toward zero.
    pub fn present_velocity(&self) -> i64 {
        self.velocity.trunc() as i64
    }

    pub fn present_position(&self) -> i64 {
        self.position.trunc() as i64
    }

    pub fn table(&self) -> &ControlTable {
        &self.table
    }

    /// Read exactly one register as little-endian bytes.
    pub fn read(&self, addr: u16, len: u16) -> Result<Vec<u8>, TableError> {
        let (index, reg) = lookup(addr, len)?;
        let value = match addr {
            ADDR_PRESENT_VELOCITY => self.present_velocity(),
            ADDR_PRESENT_POSITION => self.present_position(),
            _ => self.table.get_index(index),
        };
        Ok(reg.encode(value))
    }

    /// Validate a write without applying it.
    pub fn check_write(&self, addr: u16, data: &[u8]) -> Result<(), TableError> {
        let len = u16::try_from(data.len()).map_err(|_| TableError::DataLength { addr, len: u16::MAX })?;
        let (_, reg) = lookup(addr, len)?;
        match reg.access {
            Access::ReadOnly => Err(TableError::Access { addr }),
            Access::Eeprom if self.torque_on() => Err(TableError::Access { addr }),
            _ => Ok(()),
        }
    }

    /// Write one register, clamping the value to its range.
    pub fn write(&mut self, addr: u16, data: &[u8]) -> Result<(), TableError> {
        self.check_write(addr, data)?;
        let (index, reg) = lookup(addr, data.len() as u16)?;
        self.table.set_index(index, reg.decode(data));
        if addr == ADDR_OPERATING_MODE && self.mode() == OperatingMode::Position {
            self.position = self.position.clamp(0.0, POSITION_MAX as f64);
        }
        Ok(())
    }

    /// Convenience for typed register writes; same rules as [`write`](Self::write).
    pub fn write_value(&mut self, addr: u16, value: i64) -> Result<(), TableError> {
        let reg = REGISTERS
            .iter()
            .find(|r| r.addr == addr)
            .ok_or(TableError::DataLength { addr, len: 0 })?;
        self.write(addr, &reg.encode(reg.clamp(value)))
    }

    /// Advance the motor model by `dt` seconds.
    pub fn step(&mut self, dt: f64) {
        debug_assert!(dt > 0.0);
        let max_dv = ACCEL_LIMIT * dt;
        let before = self.velocity;

        let target = if !self.torque_on() {
            0.0
        } else {
            match self.mode() {
                OperatingMode::Velocity => self.goal_velocity() as f64,
                OperatingMode::Position => {
                    let error = self.goal_position() as f64 - self.position;
                    if error.abs() <= 1.0 && before.abs() <= max_dv {
                        self.velocity = 0.0;
                        return;
                    }
                    let cap = match self.goal_velocity().abs() {
                        0 => VELOCITY_LIMIT_F,
                        v => v as f64,
                    };
                    // Fastest speed from which the slew limit can still stop at the goal.
                    let braking = (2.0 * ACCEL_LIMIT * error.abs() / TICKS_PER_SEC_PER_UNIT).sqrt();
                    error.signum() * cap.min(braking)
                }
                OperatingMode::Other(_) => 0.0,
            }
        };

        let dv = (target - before).clamp(-max_dv, max_dv);
        self.velocity = (before + dv).clamp(-VELOCITY_LIMIT_F, VELOCITY_LIMIT_F);

        // Velocity is piecewise linear within a step, so the trapezoid is exact.
        let advance = 0.5 * (before + self.velocity) * TICKS_PER_SEC_PER_UNIT * dt;
        self.position += advance;
        self.position = match self.mode() {
            OperatingMode::Position => self.position.clamp(0.0, POSITION_MAX as f64),
            _ => self.position.rem_euclid(TICKS_PER_REV),
        };
    }
}
