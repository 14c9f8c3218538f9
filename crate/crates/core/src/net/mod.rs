//! Networked roles over TCP: a processing node that brokers events, sensors
//! that submit detection frames and consumers (user equipment) that decide
//! locally whether to raise an alarm.

use std::io::{self, BufRead, BufReader, ErrorKind};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::protocol::{decode, ErrorBody, ProtocolError, WireMessage};

pub mod consumer;
pub mod processing;
pub mod sensor;

pub use consumer::{run_consumer, ConsumerConfig, ConsumerNotice, ConsumerReport};
pub use processing::{ProcessingConfig, ProcessingHandle, ProcessingNode, ProcessingStats};
pub use sensor::{run_sensor, SensorConfig, SensorReport};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("cannot connect to {addr}")]
    Connect { addr: String, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("peer rejected request: {} ({})", .0.code, .0.message)]
    Rejected(ErrorBody),
    #[error("timed out waiting for {0}")]
    Timeout(&'static str),
    #[error("connection closed by peer")]
    Closed,
}

/// Wall clock in milliseconds since the Unix epoch.
pub fn now_ms() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64() * 1000.0)
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Processing,
    Sensor,
    Consumer,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Processing => "processing",
            Role::Sensor => "sensor",
            Role::Consumer => "consumer",
        }
    }
}

/// `ts | role | msg_type | device | zone | latency_ms`
pub fn log_line(
    ts: f64,
    role: Role,
    msg_type: &str,
    device: &str,
    zone: Option<&str>,
    latency_ms: Option<f64>,
) -> String {
    let latency = latency_ms.map_or_else(|| "-".to_string(), |l| format!("{l:.3}"));
    format!(
        "{ts:.3} | {} | {msg_type} | {} | {} | {latency}",
        role.as_str(),
        if device.is_empty() { "-" } else { device },
        zone.unwrap_or("-"),
    )
}

pub(crate) enum Recv {
    Msg(WireMessage, f64),
    Bad(ProtocolError),
    Timeout,
    Eof,
}

/// Line-framed reader half; keeps partial lines across read timeouts.
pub(crate) struct LineReader {
    inner: BufReader<TcpStream>,
    pending: Vec<u8>,
}

impl LineReader {
    pub(crate) fn new(stream: TcpStream) -> Self {
        Self {
            inner: BufReader::new(stream),
            pending: Vec::new(),
        }
    }

    pub(crate) fn recv(&mut self) -> io::Result<Recv> {
        match self.inner.read_until(b'\n', &mut self.pending) {
            Ok(0) if self.pending.is_empty() => Ok(Recv::Eof),
            Ok(_) if !self.pending.ends_with(b"\n") => Ok(Recv::Eof),
            Ok(_) => {
                let t_receive = now_ms();
                let line = std::mem::take(&mut self.pending);
                Ok(match decode(&line) {
                    Ok(m) => Recv::Msg(m, t_receive),
                    Err(e) => Recv::Bad(e),
                })
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                Ok(Recv::Timeout)
            }
            Err(e) => Err(e),
        }
    }
}

pub(crate) fn connect(addr: &str, timeout: Duration) -> Result<TcpStream, NetError> {
    let err = |source| NetError::Connect {
        addr: addr.to_string(),
        source,
    };
    let mut last = io::Error::new(ErrorKind::InvalidInput, "address did not resolve");
    for sa in addr.to_socket_addrs().map_err(err)? {
        match TcpStream::connect_timeout(&sa, timeout) {
            Ok(s) => {
                s.set_nodelay(true).ok();
                return Ok(s);
            }
            Err(e) => last = e,
        }
    }
    Err(err(last))
}

/// Reads until a message arrives or `deadline` passes.
pub(crate) fn recv_blocking(
    r: &mut LineReader,
    deadline: Duration,
    what: &'static str,
) -> Result<(WireMessage, f64), NetError> {
    let start = std::time::Instant::now();
    loop {
        match r.recv()? {
            Recv::Msg(m, t) => return Ok((m, t)),
            Recv::Bad(e) => return Err(e.into()),
            Recv::Eof => return Err(NetError::Closed),
            Recv::Timeout if start.elapsed() >= deadline => return Err(NetError::Timeout(what)),
            Recv::Timeout => {}
        }
    }
}
