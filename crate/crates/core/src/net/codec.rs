//! Fixed-layout datagrams for robot commands and vision frames.
//!
//! Command (17 bytes, little-endian):
//!
//! ```text
//! off  0  magic u32 = 0x53534C43
//!      4  version u8 = 1
//!      5  robot_id u8
//!      6  vx i16 (mm/s)    8  vy i16 (mm/s)    10 omega i16 (mrad/s)
//!     12  kick u16 (mm/s)  14 flags u8         15 crc16 u16
//! ```
//!
//! Vision (28 + 11·n bytes):
//!
//! ```text
//! off  0  magic u32 = 0x53534C56
//!      4  version u8 = 1
//!      5  frame_no u32
//!      9  t_us u64
//!     17  ball x i32 (mm)   21 ball y i32 (mm)
//!     25  count u8
//!     26  count × { id u8, x i32, y i32, theta i16 (mrad) }
//!      …  crc16 u16
//! ```
//!
//! The CRC is the servo-bus CRC-16 over every preceding byte.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, Vec2};
use crate::protocol::crc16;

pub const COMMAND_MAGIC: u32 = 0x5353_4C43;
pub const VISION_MAGIC: u32 = 0x5353_4C56;
pub const WIRE_VERSION: u8 = 1;
pub const COMMAND_LEN: usize = 17;
pub const VISION_HEADER_LEN: usize = 26;
pub const VISION_ROBOT_LEN: usize = 11;
pub const VISION_MIN_LEN: usize = VISION_HEADER_LEN + 2;
pub const MAX_VISION_ROBOTS: usize = 16;

pub const FLAG_DRIBBLE: u8 = 1 << 0;
pub const FLAG_CHARGE: u8 = 1 << 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("datagram length {got} does not match expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("bad magic {0:#010x}")]
    Magic(u32),
    #[error("unsupported version {0}")]
    Version(u8),
    #[error("crc mismatch")]
    Crc,
    #[error("robot count {count} needs {expected} bytes, datagram has {got}")]
    CountMismatch { count: u8, expected: usize, got: usize },
    #[error("{0} robots exceeds the frame limit")]
    TooManyRobots(usize),
}

impl WireError {
    /// Stable numeric code per failure kind.
    pub fn code(&self) -> u8 {
        match self {
            WireError::Length { .. } => 1,
            WireError::Magic(_) => 2,
            WireError::Version(_) => 3,
            WireError::Crc => 4,
            WireError::CountMismatch { .. } => 5,
            WireError::TooManyRobots(_) => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RobotCommand {
    pub robot_id: u8,
    pub vx_mm_s: i16,
    pub vy_mm_s: i16,
    pub omega_mrad_s: i16,
    /// Requested kick speed; 0 means no kick.
    pub kick_mm_s: u16,
    pub flags: u8,
}

impl RobotCommand {
    pub fn dribble(&self) -> bool {
        self.flags & FLAG_DRIBBLE != 0
    }

    pub fn charge(&self) -> bool {
        self.flags & FLAG_CHARGE != 0
    }

    pub fn encode(&self) -> [u8; COMMAND_LEN] {
        let mut buf = [0u8; COMMAND_LEN];
        buf[0..4].copy_from_slice(&COMMAND_MAGIC.to_le_bytes());
        buf[4] = WIRE_VERSION;
        buf[5] = self.robot_id;
        buf[6..8].copy_from_slice(&self.vx_mm_s.to_le_bytes());
        buf[8..10].copy_from_slice(&self.vy_mm_s.to_le_bytes());
        buf[10..12].copy_from_slice(&self.omega_mrad_s.to_le_bytes());
        buf[12..14].copy_from_slice(&self.kick_mm_s.to_le_bytes());
        buf[14] = self.flags;
        let crc = crc16(&buf[..15]);
        buf[15..17].copy_from_slice(&crc.to_le_bytes());
        buf
    }

    pub fn decode(buf: &[u8]) -> Result<Self, WireError> {
        if buf.len() != COMMAND_LEN {
            return Err(WireError::Length {
                expected: COMMAND_LEN,
                got: buf.len(),
            });
        }
        let mut r = Reader::new(buf);
        check_preamble(&mut r, COMMAND_MAGIC)?;
        check_crc(buf)?;
        Ok(Self {
            robot_id: r.u8(),
            vx_mm_s: r.i16(),
            vy_mm_s: r.i16(),
            omega_mrad_s: r.i16(),
            kick_mm_s: r.u16(),
            flags: r.u8(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisionRobot {
    pub id: u8,
    pub x_mm: i32,
    pub y_mm: i32,
    pub theta_mrad: i16,
}

impl VisionRobot {
    pub fn pose(&self) -> Pose {
        Pose::new(
            self.x_mm as f64 / 1000.0,
            self.y_mm as f64 / 1000.0,
            self.theta_mrad as f64 / 1000.0,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisionFrame {
    pub frame_no: u32,
    pub t_us: u64,
    pub ball_x_mm: i32,
    pub ball_y_mm: i32,
    pub robots: Vec<VisionRobot>,
}

impl VisionFrame {
    pub fn ball(&self) -> Vec2 {
        Vec2::new(self.ball_x_mm as f64 / 1000.0, self.ball_y_mm as f64 / 1000.0)
    }

    pub fn robot(&self, id: u8) -> Option<&VisionRobot> {
        self.robots.iter().find(|r| r.id == id)
    }

    pub fn encoded_len(&self) -> usize {
        VISION_MIN_LEN + VISION_ROBOT_LEN * self.robots.len()
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        if self.robots.len() > MAX_VISION_ROBOTS {
            return Err(WireError::TooManyRobots(self.robots.len()));
        }
        let mut buf = Vec::with_capacity(self.encoded_len());
        buf.extend_from_slice(&VISION_MAGIC.to_le_bytes());
        buf.push(WIRE_VERSION);
        buf.extend_from_slice(&self.frame_no.to_le_bytes());
        buf.extend_from_slice(&self.t_us.to_le_bytes());
        buf.extend_from_slice(&self.ball_x_mm.to_le_bytes());
        buf.extend_from_slice(&self.ball_y_mm.to_le_bytes());
        buf.push(self.robots.len() as u8);
        for r in &self.robots {
            buf.push(r.id);
            buf.extend_from_slice(&r.x_mm.to_le_bytes());
            buf.extend_from_slice(&r.y_mm.to_le_bytes());
            buf.extend_from_slice(&r.theta_mrad.to_le_bytes());
        }
        let crc = crc16(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        Ok(buf)
    }

    pub fn decode(buf: &[u8]) -> Result<Self, WireError> {
        if buf.len() < VISION_MIN_LEN {
            return Err(WireError::Length {
                expected: VISION_MIN_LEN,
                got: buf.len(),
            });
        }
        let mut r = Reader::new(buf);
        check_preamble(&mut r, VISION_MAGIC)?;
        let count = buf[VISION_HEADER_LEN - 1];
        let expected = VISION_MIN_LEN + VISION_ROBOT_LEN * count as usize;
        if buf.len() != expected {
            return Err(WireError::CountMismatch {
                count,
                expected,
                got: buf.len(),
            });
        }
        check_crc(buf)?;
        let frame_no = r.u32();
        let t_us = r.u64();
        let ball_x_mm = r.i32();
        let ball_y_mm = r.i32();
        let _count = r.u8();
        let robots = (0..count)
            .map(|_| VisionRobot {
                id: r.u8(),
                x_mm: r.i32(),
                y_mm: r.i32(),
                theta_mrad: r.i16(),
            })
            .collect();
        Ok(Self {
            frame_no,
            t_us,
            ball_x_mm,
            ball_y_mm,
            robots,
        })
    }
}

fn check_preamble(r: &mut Reader<'_>, magic: u32) -> Result<(), WireError> {
    let got = r.u32();
    if got != magic {
        return Err(WireError::Magic(got));
    }
    let version = r.u8();
    if version != WIRE_VERSION {
        return Err(WireError::Version(version));
    }
    Ok(())
}

fn check_crc(buf: &[u8]) -> Result<(), WireError> {
    let (body, tail) = buf.split_at(buf.len() - 2);
    if crc16(body) != u16::from_le_bytes([tail[0], tail[1]]) {
        return Err(WireError::Crc);
    }
    Ok(())
}

/// Little-endian cursor. Callers validate the length first; reads past the
/// end yield zero bytes rather than panicking.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        if let Some(src) = self.buf.get(self.pos..self.pos + N) {
            out.copy_from_slice(src);
        }
        self.pos += N;
        out
    }

    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }
    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }
    fn i16(&mut self) -> i16 {
        i16::from_le_bytes(self.take())
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn i32(&mut self) -> i32 {
        i32::from_le_bytes(self.take())
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }
}
