use dynapitch_core::protocol::{InstructionPacket, Packet, ParseEvent, StreamParser, BROADCAST_ID};
use dynapitch_core::VirtualBus;

use crate::{Failure, ScanArgs};

pub fn run(args: ScanArgs) -> Result<(), Failure> {
    print!("{}", scan(args.servos)?);
    Ok(())
}

/// The table printed by `scan-bus`.
pub fn scan(n: u8) -> Result<String, Failure> {
    let mut bus = VirtualBus::with_drive_servos(1..=n).map_err(|e| Failure::Usage(e.to_string()))?;
    let ping = InstructionPacket::ping(BROADCAST_ID)
        .encode()
        .expect("broadcast ping encodes");
    let mut parser = StreamParser::new();
    let mut events = Vec::new();
    for reply in bus.transact(&ping) {
        events.extend(parser.push(&reply));
    }
    events.extend(parser.finish());

    let mut out = String::from("ID  MODEL  FIRMWARE\n");
    for event in events {
        match event {
            ParseEvent::Packet(Packet::Status(s)) if s.params.len() == 3 => {
                let model = u16::from_le_bytes([s.params[0], s.params[1]]);
                out.push_str(&format!("{:>2}  {:>5}  {:>8}\n", s.source_id, model, s.params[2]));
            }
            other => return Err(Failure::Decode(format!("unexpected reply on the bus: {other:?}"))),
        }
    }
    Ok(out)
}
