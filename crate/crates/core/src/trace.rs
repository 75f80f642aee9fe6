//! Canonical per-control-tick trace records and their running hash.
//!
//! Each record serializes to one line of JSON with a fixed field order. The
//! trace hash is 64-bit FNV-1a over the concatenated lines, newline included,
//! so a written trace file hashes to the same value.

use std::hash::Hasher;
use std::io::{self, Write};

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::field::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallRecord {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotRecord {
    pub id: u8,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Control tick index.
    pub tick: u64,
    pub t: f64,
    pub ball: BallRecord,
    pub robots: Vec<RobotRecord>,
}

impl TraceRecord {
    pub fn from_world(tick: u64, world: &WorldState) -> Self {
        let b = world.ball;
        Self {
            tick,
            t: world.t,
            ball: BallRecord {
                x: b.pos.x,
                y: b.pos.y,
                vx: b.vel.x,
                vy: b.vel.y,
            },
            robots: world
                .robots
                .iter()
                .map(|r| RobotRecord {
                    id: r.id,
                    x: r.pose.x,
                    y: r.pose.y,
                    theta: r.pose.theta,
                    v_cap: r.kicker.v_cap,
                })
                .collect(),
        }
    }

    /// The canonical line, including the trailing newline.
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("records contain only finite numbers");
        s.push('\n');
        s
    }
}

/// Hashes trace lines and optionally copies them to a sink.
pub struct TraceLog<'a> {
    hasher: FnvHasher,
    records: u64,
    sink: Option<&'a mut dyn Write>,
}

impl std::fmt::Debug for TraceLog<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceLog")
            .field("hash", &format_args!("{:016x}", self.hash()))
            .field("records", &self.records)
            .field("sink", &self.sink.is_some())
            .finish()
    }
}

impl Default for TraceLog<'_> {
    fn default() -> Self {
        Self::new(None)
    }
}

impl<'a> TraceLog<'a> {
    pub fn new(sink: Option<&'a mut dyn Write>) -> Self {
        Self {
            hasher: FnvHasher::default(),
            records: 0,
            sink,
        }
    }

    pub fn record(&mut self, rec: &TraceRecord) -> io::Result<()> {
        let line = rec.to_line();
        self.hasher.write(line.as_bytes());
        self.records += 1;
        if let Some(sink) = self.sink.as_mut() {
            sink.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn hash(&self) -> u64 {
        self.hasher.finish()
    }

    pub fn flush(&mut self) -> io::Result<()> {
        match self.sink.as_mut() {
            Some(s) => s.flush(),
            None => Ok(()),
        }
    }
}

/// FNV-1a 64 of a byte string, e.g. a whole trace file.
pub fn trace_hash(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}
