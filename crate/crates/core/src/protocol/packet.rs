use super::crc::crc16;
use super::stuffing::{stuff, unstuff};
use super::ProtocolError;

pub const HEADER: [u8; 4] = [0xFF, 0xFF, 0xFD, 0x00];

/// Address that matches every servo on the bus.
pub const BROADCAST_ID: u8 = 0xFE;

/// Largest parameter block an instruction may carry.
pub const MAX_PARAMS: usize = 65_532;

pub(crate) const STATUS_INSTRUCTION: u8 = 0x55;

/// Header (4) + id (1) + length (2).
pub(crate) const PREFIX_LEN: usize = 7;

/// True for ids that may appear on the wire.
pub fn is_valid_id(id: u8) -> bool {
    id != 0xFD && id != 0xFF
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Instruction {
    Ping = 0x01,
    Read = 0x02,
    Write = 0x03,
    SyncRead = 0x82,
    SyncWrite = 0x83,
}

impl TryFrom<u8> for Instruction {
    type Error = ProtocolError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Ok(match value {
            0x01 => Instruction::Ping,
            0x02 => Instruction::Read,
            0x03 => Instruction::Write,
            0x82 => Instruction::SyncRead,
            0x83 => Instruction::SyncWrite,
            other => return Err(ProtocolError::UnknownInstruction(other)),
        })
    }
}

impl std::fmt::Display for Instruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Instruction::Ping => "PING",
            Instruction::Read => "READ",
            Instruction::Write => "WRITE",
            Instruction::SyncRead => "SYNC_READ",
            Instruction::SyncWrite => "SYNC_WRITE",
        };
        f.write_str(name)
    }
}

/// Status error byte bits reported by a servo.
pub mod status_error {
    pub const RESULT_FAIL: u8 = 1 << 0;
    pub const INSTRUCTION: u8 = 1 << 1;
    pub const CRC: u8 = 1 << 2;
    pub const DATA_RANGE: u8 = 1 << 3;
    pub const DATA_LENGTH: u8 = 1 << 4;
    pub const DATA_LIMIT: u8 = 1 << 5;
    pub const ACCESS: u8 = 1 << 6;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionPacket {
    pub target_id: u8,
    pub instruction: Instruction,
    pub params: Vec<u8>,
}

impl InstructionPacket {
    pub fn new(target_id: u8, instruction: Instruction, params: Vec<u8>) -> Self {
        Self {
            target_id,
            instruction,
            params,
        }
    }

    pub fn ping(target_id: u8) -> Self {
        Self::new(target_id, Instruction::Ping, Vec::new())
    }

    pub fn read(target_id: u8, addr: u16, len: u16) -> Self {
        let mut params = Vec::with_capacity(4);
        params.extend_from_slice(&addr.to_le_bytes());
        params.extend_from_slice(&len.to_le_bytes());
        Self::new(target_id, Instruction::Read, params)
    }

    pub fn write(target_id: u8, addr: u16, data: &[u8]) -> Self {
        let mut params = Vec::with_capacity(2 + data.len());
        params.extend_from_slice(&addr.to_le_bytes());
        params.extend_from_slice(data);
        Self::new(target_id, Instruction::Write, params)
    }

    /// SYNC_WRITE of `len`-byte values; every slice in `entries` must be `len` long.
    pub fn sync_write<'a>(
        addr: u16,
        len: u16,
        entries: impl IntoIterator<Item = (u8, &'a [u8])>,
    ) -> Self {
        let mut params = Vec::new();
        params.extend_from_slice(&addr.to_le_bytes());
        params.extend_from_slice(&len.to_le_bytes());
        for (id, data) in entries {
            debug_assert_eq!(data.len(), len as usize);
            params.push(id);
            params.extend_from_slice(data);
        }
        Self::new(BROADCAST_ID, Instruction::SyncWrite, params)
    }

    pub fn sync_read(addr: u16, len: u16, ids: &[u8]) -> Self {
        let mut params = Vec::with_capacity(4 + ids.len());
        params.extend_from_slice(&addr.to_le_bytes());
        params.extend_from_slice(&len.to_le_bytes());
        params.extend_from_slice(ids);
        Self::new(BROADCAST_ID, Instruction::SyncRead, params)
    }

    pub fn is_broadcast(&self) -> bool {
        self.target_id == BROADCAST_ID
    }

    /// Serialize to a complete wire frame.
    pub fn encode(&self) -> Result<Vec<u8>, ProtocolError> {
        if !is_valid_id(self.target_id) {
            return Err(ProtocolError::ReservedId(self.target_id));
        }
        if self.params.len() > MAX_PARAMS {
            return Err(ProtocolError::ParamsTooLong(self.params.len()));
        }
        let mut region = Vec::with_capacity(1 + self.params.len());
        region.push(self.instruction as u8);
        region.extend_from_slice(&self.params);
        assemble(self.target_id, &region)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusPacket {
    pub source_id: u8,
    pub error: u8,
    pub params: Vec<u8>,
}

impl StatusPacket {
    pub fn ok(source_id: u8, params: Vec<u8>) -> Self {
        Self {
            source_id,
            error: 0,
            params,
        }
    }

    pub fn error(source_id: u8, error: u8) -> Self {
        Self {
            source_id,
            error,
            params: Vec::new(),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, ProtocolError> {
        if !is_valid_id(self.source_id) {
            return Err(ProtocolError::ReservedId(self.source_id));
        }
        if self.params.len() > MAX_PARAMS - 1 {
            return Err(ProtocolError::ParamsTooLong(self.params.len()));
        }
        let mut region = Vec::with_capacity(2 + self.params.len());
        region.push(STATUS_INSTRUCTION);
        region.push(self.error);
        region.extend_from_slice(&self.params);
        assemble(self.source_id, &region)
    }
}

/// Either direction of bus traffic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Instruction(InstructionPacket),
    Status(StatusPacket),
}

impl Packet {
    pub fn encode(&self) -> Result<Vec<u8>, ProtocolError> {
        match self {
            Packet::Instruction(p) => p.encode(),
            Packet::Status(p) => p.encode(),
        }
    }

    pub fn id(&self) -> u8 {
        match self {
            Packet::Instruction(p) => p.target_id,
            Packet::Status(p) => p.source_id,
        }
    }
}

impl From<InstructionPacket> for Packet {
    fn from(p: InstructionPacket) -> Self {
        Packet::Instruction(p)
    }
}

impl From<StatusPacket> for Packet {
    fn from(p: StatusPacket) -> Self {
        Packet::Status(p)
    }
}

fn assemble(id: u8, region: &[u8]) -> Result<Vec<u8>, ProtocolError> {
    let stuffed = stuff(region);
    let length = stuffed.len() + 2;
    let length = u16::try_from(length).map_err(|_| ProtocolError::ParamsTooLong(region.len()))?;

    let mut frame = Vec::with_capacity(PREFIX_LEN + length as usize);
    frame.extend_from_slice(&HEADER);
    frame.push(id);
    frame.extend_from_slice(&length.to_le_bytes());
    frame.extend_from_slice(&stuffed);
    let crc = crc16(&frame);
    frame.extend_from_slice(&crc.to_le_bytes());
    Ok(frame)
}

/// Decode exactly one complete frame.
pub fn decode_frame(frame: &[u8]) -> Result<Packet, ProtocolError> {
    if frame.len() < PREFIX_LEN + 3 {
        return Err(ProtocolError::Truncated(frame.len()));
    }
    if frame[..4] != HEADER {
        return Err(ProtocolError::BadHeader);
    }
    let length = u16::from_le_bytes([frame[5], frame[6]]) as usize;
    if length < 3 {
        return Err(ProtocolError::BadLength(length));
    }
    if frame.len() != PREFIX_LEN + length {
        return Err(ProtocolError::LengthMismatch {
            declared: length,
            actual: frame.len().saturating_sub(PREFIX_LEN),
        });
    }
    let body_end = frame.len() - 2;
    let expected = u16::from_le_bytes([frame[body_end], frame[body_end + 1]]);
    let computed = crc16(&frame[..body_end]);
    if expected != computed {
        return Err(ProtocolError::CrcMismatch { expected, computed });
    }
    decode_body(frame[4], &frame[PREFIX_LEN..body_end])
}

/// Decode a CRC-verified stuffed region.
pub(crate) fn decode_body(id: u8, stuffed: &[u8]) -> Result<Packet, ProtocolError> {
    if !is_valid_id(id) {
        return Err(ProtocolError::ReservedId(id));
    }
    let region = unstuff(stuffed)?;
    let (&instr, rest) = region.split_first().ok_or(ProtocolError::BadLength(2))?;
    if instr == STATUS_INSTRUCTION {
        let (&error, params) = rest.split_first().ok_or(ProtocolError::BadLength(3))?;
        return Ok(Packet::Status(StatusPacket {
            source_id: id,
            error,
            params: params.to_vec(),
        }));
    }
    Ok(Packet::Instruction(InstructionPacket {
        target_id: id,
        instruction: Instruction::try_from(instr)?,
        params: rest.to_vec(),
    }))
}
