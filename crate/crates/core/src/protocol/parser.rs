//! Incremental, resynchronizing frame parser.
//!
//! Bytes may arrive in arbitrarily sized chunks. Skipped bytes are batched
//! into a single `Desync` that is emitted just before the next frame event,
//! which makes the whole event sequence independent of how the stream was
//! chunked.

use super::crc::crc16;
use super::packet::{decode_body, Packet, HEADER, PREFIX_LEN};

/// Frames longer than this are treated as line noise.
pub const MAX_FRAME_LEN: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseEvent {
    Packet(Packet),
    /// Bytes discarded while hunting for a header. Always nonzero.
    Desync(usize),
    /// A complete frame whose CRC did not match; carries the raw frame.
    CrcError(Vec<u8>),
}

#[derive(Debug, Default, Clone)]
pub struct StreamParser {
    buf: Vec<u8>,
    skipped: usize,
}

impl StreamParser {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bytes held while waiting for the rest of a frame.
    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Feed one chunk, returning every event it completes.
    pub fn push(&mut self, chunk: &[u8]) -> Vec<ParseEvent> {
        self.buf.extend_from_slice(chunk);
        let mut events = Vec::new();
        let mut pos = 0;

        loop {
            let rest = &self.buf[pos..];
            let Some(start) = find_header(rest) else {
                let keep = partial_header_suffix(rest);
                self.skipped += rest.len() - keep;
                pos += rest.len() - keep;
                break;
            };
            self.skipped += start;
            pos += start;

            let rest = &self.buf[pos..];
            if rest.len() < PREFIX_LEN {
                break;
            }
            let length = u16::from_le_bytes([rest[5], rest[6]]) as usize;
            let total = PREFIX_LEN + length;
            if length < 3 || total > MAX_FRAME_LEN {
                self.skipped += 1;
                pos += 1;
                continue;
            }
            if rest.len() < total {
                break;
            }

            let frame = &rest[..total];
            let body_end = total - 2;
            let expected = u16::from_le_bytes([frame[body_end], frame[body_end + 1]]);
            if crc16(&frame[..body_end]) != expected {
                flush_skipped(&mut self.skipped, &mut events);
                events.push(ParseEvent::CrcError(frame.to_vec()));
            } else {
                match decode_body(frame[4], &frame[PREFIX_LEN..body_end]) {
                    Ok(packet) => {
                        flush_skipped(&mut self.skipped, &mut events);
                        events.push(ParseEvent::Packet(packet));
                    }
                    // Intact but meaningless frame (reserved id, unknown
                    // instruction, bad escape): count it as noise.
                    Err(_) => self.skipped += total,
                }
            }
            pos += total;
        }

        self.buf.drain(..pos);
        events
    }

    /// End of stream: report anything still buffered as skipped.
    pub fn finish(&mut self) -> Vec<ParseEvent> {
        self.skipped += self.buf.len();
        self.buf.clear();
        let mut events = Vec::new();
        flush_skipped(&mut self.skipped, &mut events);
        events
    }
}

fn flush_skipped(skipped: &mut usize, events: &mut Vec<ParseEvent>) {
    if *skipped > 0 {
        events.push(ParseEvent::Desync(*skipped));
        *skipped = 0;
    }
}

fn find_header(buf: &[u8]) -> Option<usize> {
    buf.windows(HEADER.len()).position(|w| w == HEADER)
}

/// Length of the longest suffix of `buf` that could begin a header.
fn partial_header_suffix(buf: &[u8]) -> usize {
    (1..HEADER.len())
        .rev()
        .find(|&n| buf.len() >= n && buf[buf.len() - n..] == HEADER[..n])
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{InstructionPacket, StatusPacket};

    fn ping1() -> Vec<u8> {
        InstructionPacket::ping(1).encode().unwrap()
    }

    fn packets(events: &[ParseEvent]) -> Vec<Packet> {
        events
            .iter()
            .filter_map(|e| match e {
                ParseEvent::Packet(p) => Some(p.clone()),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn byte_at_a_time() {
        let mut parser = StreamParser::new();
        let mut events = Vec::new();
        for b in ping1() {
            events.extend(parser.push(&[b]));
        }
        assert_eq!(events, vec![ParseEvent::Packet(InstructionPacket::ping(1).into())]);
        assert_eq!(parser.buffered(), 0);
    }

    #[test]
    fn flipped_crc_byte() {
        let mut frame = ping1();
        *frame.last_mut().unwrap() ^= 0xFF;
        let mut parser = StreamParser::new();
        let events = parser.push(&frame);
        assert_eq!(events, vec![ParseEvent::CrcError(frame.clone())]);
    }

    #[test]
    fn garbage_then_frame() {
        let mut stream = vec![0x00, 0x11, 0xFF, 0x22, 0xFD, 0xFF, 0xFF];
        stream.extend(ping1());
        let mut parser = StreamParser::new();
        let events = parser.push(&stream);
        assert_eq!(
            events,
            vec![
                ParseEvent::Desync(7),
                ParseEvent::Packet(InstructionPacket::ping(1).into())
            ]
        );
    }

    #[test]
    fn resyncs_after_crc_error() {
        let mut bad = ping1();
        bad[8] ^= 0x40;
        let status = StatusPacket::ok(2, vec![0x24, 0x04, 0x2E]);
        let mut stream = bad.clone();
        stream.extend(status.encode().unwrap());
        let events = StreamParser::new().push(&stream);
        assert_eq!(
            events,
            vec![ParseEvent::CrcError(bad), ParseEvent::Packet(status.into())]
        );
    }

    #[test]
    fn oversized_length_is_desync() {
        let mut stream = vec![0xFF, 0xFF, 0xFD, 0x00, 0x01, 0xFF, 0x7F];
        stream.extend(ping1());
        let mut parser = StreamParser::new();
        let events = parser.push(&stream);
        assert_eq!(
            events,
            vec![
                ParseEvent::Desync(7),
                ParseEvent::Packet(InstructionPacket::ping(1).into())
            ]
        );
    }

    #[test]
    fn unknown_instruction_with_valid_crc_is_skipped() {
        let mut frame = vec![0xFF, 0xFF, 0xFD, 0x00, 0x01, 0x03, 0x00, 0x09];
        let crc = crc16(&frame);
        frame.extend_from_slice(&crc.to_le_bytes());
        let mut parser = StreamParser::new();
        assert!(parser.push(&frame).is_empty());
        assert_eq!(parser.finish(), vec![ParseEvent::Desync(10)]);
    }

    #[test]
    fn trailing_partial_header_is_held() {
        let mut parser = StreamParser::new();
        assert!(parser.push(&[0x01, 0x02, 0xFF, 0xFF]).is_empty());
        assert_eq!(parser.buffered(), 2);
        let frame = ping1();
        let events = parser.push(&frame[2..]);
        assert_eq!(
            events,
            vec![
                ParseEvent::Desync(2),
                ParseEvent::Packet(InstructionPacket::ping(1).into())
            ]
        );
    }

    #[test]
    fn chunking_invariance_over_split_points() {
        let mut stream = vec![0x42; 5];
        stream.extend(ping1());
        stream.extend(InstructionPacket::write(7, 104, &(-100i32).to_le_bytes()).encode().unwrap());
        stream.extend([0xFF, 0xFF, 0xFD, 0xFD, 0x10]);
        stream.extend(StatusPacket::ok(7, vec![0xFF, 0xFF, 0xFD, 0x00]).encode().unwrap());

        let mut whole = StreamParser::new();
        let mut reference = whole.push(&stream);
        reference.extend(whole.finish());
        assert_eq!(packets(&reference).len(), 3);

        for a in 0..stream.len() {
            for b in a..stream.len() {
                let mut parser = StreamParser::new();
                let mut events = parser.push(&stream[..a]);
                events.extend(parser.push(&stream[a..b]));
                events.extend(parser.push(&stream[b..]));
                events.extend(parser.finish());
                assert_eq!(events, reference, "split at {a},{b}");
            }
        }
    }
}
