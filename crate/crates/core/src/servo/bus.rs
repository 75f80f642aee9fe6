use std::collections::BTreeMap;

use thiserror::Error;

use super::state::ServoState;
use super::table::{TableError, ADDR_ID};
use crate::protocol::{
    decode_frame, is_valid_id, status_error, Instruction, InstructionPacket, Packet, ProtocolError,
    StatusPacket, BROADCAST_ID,
};

/// Model number reported in PING replies (XL430-W250).
pub const MODEL_NUMBER: u16 = 1060;
pub const FIRMWARE_VERSION: u8 = 46;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BusError {
    #[error("id {0} cannot be assigned to a servo")]
    InvalidId(u8),
    #[error("id {0} is already on the bus")]
    DuplicateId(u8),
}

/// Something the bus could not act on. Recorded, never returned on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BusFault {
    Undecodable(ProtocolError),
    MalformedParams(Instruction),
    SyncWriteRejected { id: u8, error: TableError },
}

/// A half-duplex multi-drop bus: one instruction in, zero or more statuses out.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VirtualBus {
    servos: BTreeMap<u8, ServoState>,
    faults: Vec<BusFault>,
}

impl VirtualBus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bus populated with drive-wheel servos (velocity mode, torque on).
    pub fn with_drive_servos(ids: impl IntoIterator<Item = u8>) -> Result<Self, BusError> {
        let mut bus = Self::new();
        for id in ids {
            check_assignable(id)?;
            bus.attach(ServoState::drive_wheel(id))?;
        }
        Ok(bus)
    }

    pub fn attach(&mut self, servo: ServoState) -> Result<(), BusError> {
        let id = servo.id();
        check_assignable(id)?;
        if self.servos.contains_key(&id) {
            return Err(BusError::DuplicateId(id));
        }
        self.servos.insert(id, servo);
        Ok(())
    }

    pub fn ids(&self) -> impl Iterator<Item = u8> + '_ {
        self.servos.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.servos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.servos.is_empty()
    }

    pub fn servo(&self, id: u8) -> Option<&ServoState> {
        self.servos.get(&id)
    }

    pub fn servo_mut(&mut self, id: u8) -> Option<&mut ServoState> {
        self.servos.get_mut(&id)
    }

    pub fn servos(&self) -> impl Iterator<Item = &ServoState> {
        self.servos.values()
    }

    pub fn faults(&self) -> &[BusFault] {
        &self.faults
    }

    pub fn take_faults(&mut self) -> Vec<BusFault> {
        std::mem::take(&mut self.faults)
    }

    /// Advance every servo's dynamics.
    pub fn step(&mut self, dt: f64) {
        for servo in self.servos.values_mut() {
            servo.step(dt);
        }
    }

    /// Deliver one encoded instruction frame; returns the encoded status replies.
    pub fn transact(&mut self, frame: &[u8]) -> Vec<Vec<u8>> {
        let packet = match decode_frame(frame) {
            Ok(Packet::Instruction(p)) => p,
            // Another device's reply on the shared line; nothing to do.
            Ok(Packet::Status(_)) => return Vec::new(),
            Err(e) => {
                self.faults.push(BusFault::Undecodable(e));
                return Vec::new();
            }
        };
        self.execute(&packet)
            .iter()
            .map(|s| s.encode().expect("servo ids are valid"))
            .collect()
    }

    /// Execute a decoded instruction.
    pub fn execute(&mut self, pkt: &InstructionPacket) -> Vec<StatusPacket> {
        match pkt.instruction {
            Instruction::Ping => self.ping(pkt.target_id),
            Instruction::Read => self.read(pkt),
            Instruction::Write => self.write(pkt),
            Instruction::SyncRead => self.sync_read(pkt),
            Instruction::SyncWrite => {
                self.sync_write(pkt);
                Vec::new()
            }
        }
    }

    fn ping_reply(id: u8) -> StatusPacket {
        let mut params = MODEL_NUMBER.to_le_bytes().to_vec();
        params.push(FIRMWARE_VERSION);
        StatusPacket::ok(id, params)
    }

    fn ping(&self, target: u8) -> Vec<StatusPacket> {
        if target == BROADCAST_ID {
            self.servos.keys().map(|&id| Self::ping_reply(id)).collect()
        } else if self.servos.contains_key(&target) {
            vec![Self::ping_reply(target)]
        } else {
            Vec::new()
        }
    }

    fn read(&mut self, pkt: &InstructionPacket) -> Vec<StatusPacket> {
        let Some(servo) = self.servos.get(&pkt.target_id) else {
            return Vec::new();
        };
        let Some((addr, len)) = addr_len(&pkt.params) else {
            self.faults.push(BusFault::MalformedParams(Instruction::Read));
            return vec![StatusPacket::error(pkt.target_id, status_error::DATA_LENGTH)];
        };
        vec![match servo.read(addr, len) {
            Ok(data) => StatusPacket::ok(pkt.target_id, data),
            Err(e) => StatusPacket::error(pkt.target_id, e.status_bits()),
        }]
    }

    fn write(&mut self, pkt: &InstructionPacket) -> Vec<StatusPacket> {
        if pkt.params.len() < 2 {
            self.faults.push(BusFault::MalformedParams(Instruction::Write));
            return match self.servos.contains_key(&pkt.target_id) {
                true => vec![StatusPacket::error(pkt.target_id, status_error::DATA_LENGTH)],
                false => Vec::new(),
            };
        }
        let addr = u16::from_le_bytes([pkt.params[0], pkt.params[1]]);
        let data = &pkt.params[2..];
        if pkt.is_broadcast() {
            let ids: Vec<u8> = self.servos.keys().copied().collect();
            for id in ids {
                let _ = self.write_servo(id, addr, data);
            }
            return Vec::new();
        }
        if !self.servos.contains_key(&pkt.target_id) {
            return Vec::new();
        }
        vec![match self.write_servo(pkt.target_id, addr, data) {
            Ok(()) => StatusPacket::ok(pkt.target_id, Vec::new()),
            Err(e) => StatusPacket::error(pkt.target_id, e.status_bits()),
        }]
    }

    /// Write a register, re-keying the servo if its ID changes.
    fn write_servo(&mut self, id: u8, addr: u16, data: &[u8]) -> Result<(), TableError> {
        let servo = self.servos.get_mut(&id).expect("caller checked presence");
        if addr != ADDR_ID {
            return servo.write(addr, data);
        }
        servo.check_write(addr, data)?;
        let new_id = data[0];
        if new_id != id && (self.servos.contains_key(&new_id) || new_id > 252) {
            return Err(TableError::DataLimit { addr });
        }
        let mut servo = self.servos.remove(&id).expect("present");
        servo.write(addr, data)?;
        self.servos.insert(new_id, servo);
        Ok(())
    }

    fn sync_read(&mut self, pkt: &InstructionPacket) -> Vec<StatusPacket> {
        let Some((addr, len)) = addr_len(&pkt.params) else {
            self.faults.push(BusFault::MalformedParams(Instruction::SyncRead));
            return Vec::new();
        };
        pkt.params[4..]
            .iter()
            .filter_map(|&id| {
                let servo = self.servos.get(&id)?;
                Some(match servo.read(addr, len) {
                    Ok(data) => StatusPacket::ok(id, data),
                    Err(e) => StatusPacket::error(id, e.status_bits()),
                })
            })
            .collect()
    }

    /// All addressed servos are validated before any is written.
    fn sync_write(&mut self, pkt: &InstructionPacket) {
        let Some((addr, len)) = addr_len(&pkt.params) else {
            self.faults.push(BusFault::MalformedParams(Instruction::SyncWrite));
            return;
        };
        let body = &pkt.params[4..];
        let stride = len as usize + 1;
        if len == 0 || !body.len().is_multiple_of(stride) {
            self.faults.push(BusFault::MalformedParams(Instruction::SyncWrite));
            return;
        }
        let slices: Vec<(u8, &[u8])> = body
            .chunks_exact(stride)
            .map(|c| (c[0], &c[1..]))
            .filter(|(id, _)| self.servos.contains_key(id))
            .collect();
        for &(id, data) in &slices {
            if let Err(error) = self.servos[&id].check_write(addr, data) {
                self.faults.push(BusFault::SyncWriteRejected { id, error });
                return;
            }
        }
        for (id, data) in slices {
            if let Err(error) = self.write_servo(id, addr, data) {
                self.faults.push(BusFault::SyncWriteRejected { id, error });
            }
        }
    }
}

fn check_assignable(id: u8) -> Result<(), BusError> {
    if !is_valid_id(id) || id == BROADCAST_ID {
        return Err(BusError::InvalidId(id));
    }
    Ok(())
}

fn addr_len(params: &[u8]) -> Option<(u16, u16)> {
    if params.len() < 4 {
        return None;
    }
    Some((
        u16::from_le_bytes([params[0], params[1]]),
        u16::from_le_bytes([params[2], params[3]]),
    ))
}
