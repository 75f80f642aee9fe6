//! Ordered command queue and UDP endpoints.
//!
//! The simulation loop owns a [`CommandQueue`] and drains it once per control
//! tick. Producers hold a [`CommandSender`]; in deterministic runs the loop
//! pushes directly, in serve mode a [`UdpCommandListener`] thread does.

use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use super::codec::{RobotCommand, VisionFrame, WireError, COMMAND_LEN};

pub const DEFAULT_COMMAND_PORT: u16 = 10301;
pub const DEFAULT_VISION_PORT: u16 = 10302;

const RECV_POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Clone)]
pub struct CommandSender(Sender<RobotCommand>);

impl CommandSender {
    /// Returns false once the queue has been dropped.
    pub fn send(&self, cmd: RobotCommand) -> bool {
        self.0.send(cmd).is_ok()
    }
}

/// FIFO of decoded commands, drained by the control loop.
#[derive(Debug)]
pub struct CommandQueue {
    tx: Sender<RobotCommand>,
    rx: Receiver<RobotCommand>,
}

impl Default for CommandQueue {
    fn default() -> Self {
        Self::new()
    }
}

impl CommandQueue {
    pub fn new() -> Self {
        let (tx, rx) = mpsc::channel();
        Self { tx, rx }
    }

    pub fn sender(&self) -> CommandSender {
        CommandSender(self.tx.clone())
    }

    pub fn push(&self, cmd: RobotCommand) {
        // The queue holds its own receiver, so this cannot fail.
        let _ = self.tx.send(cmd);
    }

    /// Decodes a datagram and enqueues it on success.
    pub fn push_datagram(&self, buf: &[u8]) -> Result<RobotCommand, WireError> {
        let cmd = RobotCommand::decode(buf)?;
        self.push(cmd);
        Ok(cmd)
    }

    /// Everything received so far, in arrival order.
    pub fn drain(&self) -> Vec<RobotCommand> {
        self.rx.try_iter().collect()
    }
}

#[derive(Debug, Default)]
pub struct ListenerStats {
    pub accepted: AtomicU64,
    pub rejected: AtomicU64,
}

/// Background thread decoding command datagrams into a queue.
#[derive(Debug)]
pub struct UdpCommandListener {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    stats: Arc<ListenerStats>,
    handle: Option<JoinHandle<()>>,
}

impl UdpCommandListener {
    pub fn spawn(addr: impl ToSocketAddrs, sender: CommandSender) -> io::Result<Self> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(RECV_POLL))?;
        let local_addr = socket.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let stats = Arc::new(ListenerStats::default());
        let handle = {
            let stop = Arc::clone(&stop);
            let stats = Arc::clone(&stats);
            std::thread::Builder::new()
                .name("cmd-listener".into())
                .spawn(move || listen(socket, sender, &stop, &stats))?
        };
        Ok(Self {
            local_addr,
            stop,
            stats,
            handle: Some(handle),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn stats(&self) -> &ListenerStats {
        &self.stats
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for UdpCommandListener {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn listen(socket: UdpSocket, sender: CommandSender, stop: &AtomicBool, stats: &ListenerStats) {
    // One byte of slack so overlong datagrams are seen as such.
    let mut buf = [0u8; COMMAND_LEN + 1];
    while !stop.load(Ordering::Relaxed) {
        match socket.recv_from(&mut buf) {
            Ok((n, _)) => match RobotCommand::decode(&buf[..n]) {
                Ok(cmd) => {
                    stats.accepted.fetch_add(1, Ordering::Relaxed);
                    if !sender.send(cmd) {
                        return;
                    }
                }
                Err(_) => {
                    stats.rejected.fetch_add(1, Ordering::Relaxed);
                }
            },
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(_) => return,
        }
    }
}

/// Sends encoded vision frames to one unicast destination.
#[derive(Debug)]
pub struct UdpVisionSender {
    socket: UdpSocket,
    target: SocketAddr,
}

impl UdpVisionSender {
    pub fn new(target: SocketAddr) -> io::Result<Self> {
        let bind: SocketAddr = if target.is_ipv4() {
            ([0, 0, 0, 0], 0).into()
        } else {
            (std::net::Ipv6Addr::UNSPECIFIED, 0).into()
        };
        Ok(Self {
            socket: UdpSocket::bind(bind)?,
            target,
        })
    }

    pub fn send(&self, frame: &VisionFrame) -> io::Result<usize> {
        let bytes = frame
            .encode()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
        self.socket.send_to(&bytes, self.target)
    }
}
