use clap::Subcommand;
use dynapitch_core::protocol::{InstructionPacket, Packet, ParseEvent, StreamParser};

use crate::Failure;

#[derive(Debug, Subcommand)]
pub enum Direction {
    /// Build an instruction frame and print it as hex.
    Encode {
        #[command(subcommand)]
        instruction: EncodeInstruction,
    },
    /// Parse hex bytes (spaces allowed) and print every frame found.
    Decode { hex: Vec<String> },
}

#[derive(Debug, Subcommand)]
pub enum EncodeInstruction {
    Ping {
        #[arg(long)]
        id: u8,
    },
    Read {
        #[arg(long)]
        id: u8,
        #[arg(long)]
        address: u16,
        #[arg(long)]
        length: u16,
    },
    Write {
        #[arg(long)]
        id: u8,
        #[arg(long)]
        address: u16,
        #[arg(long, allow_negative_numbers = true)]
        value: i64,
        /// Register width in bytes.
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u16).range(1..=4))]
        size: u16,
    },
    SyncWrite {
        #[arg(long)]
        address: u16,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u16).range(1..=4))]
        size: u16,
        /// ID:VALUE, repeatable.
        #[arg(long = "entry", required = true, allow_negative_numbers = true)]
        entries: Vec<String>,
    },
    SyncRead {
        #[arg(long)]
        address: u16,
        #[arg(long)]
        length: u16,
        #[arg(long, value_delimiter = ',', required = true)]
        ids: Vec<u8>,
    },
}

pub fn run(direction: Direction) -> Result<(), Failure> {
    match direction {
        Direction::Encode { instruction } => {
            println!("{}", spaced_hex(&encode(instruction)?));
            Ok(())
        }
        Direction::Decode { hex } => {
            let (text, ok) = decode(&hex.concat())?;
            print!("{text}");
            if ok {
                Ok(())
            } else {
                Err(Failure::Decode("input did not decode cleanly".into()))
            }
        }
    }
}

fn le_bytes(value: i64, size: u16) -> Result<Vec<u8>, Failure> {
    let bits = 8 * size as u32;
    let (min, max) = (-(1i64 << (bits - 1)), (1i64 << bits) - 1);
    if value < min || value > max {
        return Err(Failure::Usage(format!("value {value} does not fit in {size} bytes")));
    }
    Ok(value.to_le_bytes()[..size as usize].to_vec())
}

fn encode(instruction: EncodeInstruction) -> Result<Vec<u8>, Failure> {
    let packet = match instruction {
        EncodeInstruction::Ping { id } => InstructionPacket::ping(id),
        EncodeInstruction::Read { id, address, length } => InstructionPacket::read(id, address, length),
        EncodeInstruction::Write {
            id,
            address,
            value,
            size,
        } => InstructionPacket::write(id, address, &le_bytes(value, size)?),
        EncodeInstruction::SyncWrite { address, size, entries } => {
            let mut parsed = Vec::with_capacity(entries.len());
            for e in &entries {
                let (id, value) = e
                    .split_once(':')
                    .ok_or_else(|| Failure::Usage(format!("entry '{e}' is not ID:VALUE")))?;
                let id: u8 = id.parse().map_err(|_| Failure::Usage(format!("bad id in '{e}'")))?;
                let value: i64 = value.parse().map_err(|_| Failure::Usage(format!("bad value in '{e}'")))?;
                parsed.push((id, le_bytes(value, size)?));
            }
            InstructionPacket::sync_write(address, size, parsed.iter().map(|(id, d)| (*id, d.as_slice())))
        }
        EncodeInstruction::SyncRead { address, length, ids } => InstructionPacket::sync_read(address, length, &ids),
    };
    packet.encode().map_err(|e| Failure::Usage(e.to_string()))
}

fn spaced_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02X}")).collect::<Vec<_>>().join(" ")
}

/// Decoded report and whether the input was exactly a sequence of frames.
fn decode(text: &str) -> Result<(String, bool), Failure> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace() && *c != ':').collect();
    let bytes = hex::decode(&compact).map_err(|e| Failure::Usage(format!("malformed hex: {e}")))?;
    let mut parser = StreamParser::new();
    let mut events = parser.push(&bytes);
    events.extend(parser.finish());

    let mut out = String::new();
    let mut clean = !events.is_empty();
    for event in events {
        match event {
            ParseEvent::Packet(Packet::Instruction(p)) => {
                out.push_str(&format!(
                    "instruction id={} {} params=[{}]\n",
                    p.target_id,
                    p.instruction,
                    spaced_hex(&p.params)
                ));
            }
            ParseEvent::Packet(Packet::Status(s)) => {
                out.push_str(&format!(
                    "status id={} error=0x{:02X} params=[{}]\n",
                    s.source_id,
                    s.error,
                    spaced_hex(&s.params)
                ));
            }
            ParseEvent::CrcError(frame) => {
                clean = false;
                out.push_str(&format!("crc_error frame=[{}]\n", spaced_hex(&frame)));
            }
            ParseEvent::Desync(n) => {
                clean = false;
                out.push_str(&format!("desync skipped={n}\n"));
            }
        }
    }
    if out.is_empty() {
        out.push_str("empty input\n");
    }
    Ok((out, clean))
}
