//! Servo bus wire format: CRC-16 framing, byte stuffing and a streaming parser.
//!
//! Frame layout (all integers little-endian):
//!
//! ```text
//! FF FF FD 00 | id | len_lo len_hi | instruction | stuffed params | crc_lo crc_hi
//! ```
//!
//! `len` counts the instruction byte, the stuffed parameters and the two CRC
//! bytes. The CRC covers everything from the first `FF` to the last
//! parameter byte. Status replies use instruction `0x55` followed by an
//! error byte.

mod crc;
mod packet;
mod parser;
mod stuffing;

pub use crc::{crc16, crc16_update};
pub use packet::{
    decode_frame, is_valid_id, status_error, Instruction, InstructionPacket, Packet, StatusPacket,
    BROADCAST_ID, HEADER, MAX_PARAMS,
};
pub use parser::{ParseEvent, StreamParser, MAX_FRAME_LEN};
pub use stuffing::{stuff, stuffed_len, unstuff};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("id {0:#04x} is reserved")]
    ReservedId(u8),
    #[error("parameter block of {0} bytes is too long")]
    ParamsTooLong(usize),
    #[error("unknown instruction {0:#04x}")]
    UnknownInstruction(u8),
    #[error("malformed escape at offset {offset}")]
    MalformedEscape { offset: usize },
    #[error("frame truncated ({0} bytes)")]
    Truncated(usize),
    #[error("missing frame header")]
    BadHeader,
    #[error("invalid length field {0}")]
    BadLength(usize),
    #[error("length field says {declared} bytes but {actual} follow")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("crc mismatch: frame carries {expected:#06x}, computed {computed:#06x}")]
    CrcMismatch { expected: u16, computed: u16 },
}
