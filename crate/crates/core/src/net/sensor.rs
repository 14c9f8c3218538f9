//! Sensor role: registers with the processing node and streams detection
//! frames over the same connection, one acknowledgement per frame.

use std::io::Write;
use std::net::TcpStream;
use std::thread;
use std::time::Duration;

use serde::Serialize;

use super::{connect, log_line, now_ms, recv_blocking, LineReader, NetError, Role};
use crate::direction::DetectionFrame;
use crate::protocol::{encode, Payload, SensorRegistration, WireMessage};
use crate::stats::LatencyStats;

#[derive(Debug, Clone)]
pub struct SensorConfig {
    pub registration: SensorRegistration,
    /// Gap between consecutive frames.
    pub pace: Duration,
    /// Artificial delay between stamping a frame and writing it.
    pub inject_delay: Duration,
    pub connect_timeout: Duration,
    pub ack_timeout: Duration,
}

impl SensorConfig {
    pub fn new(registration: SensorRegistration) -> Self {
        Self {
            registration,
            pace: Duration::from_millis(200),
            inject_delay: Duration::ZERO,
            connect_timeout: Duration::from_secs(2),
            ack_timeout: Duration::from_secs(5),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SensorReport {
    pub frames_sent: u64,
    pub events_raised: u64,
    /// One-way frame latency as measured by the processing node.
    pub t_eval_ms: Vec<f64>,
}

impl SensorReport {
    pub fn t_eval(&self) -> Option<LatencyStats> {
        LatencyStats::from_samples(&self.t_eval_ms)
    }
}

fn write_stamped(w: &mut TcpStream, payload: Payload, delay: Duration) -> Result<WireMessage, NetError> {
    let msg = WireMessage::new(now_ms(), payload);
    if !delay.is_zero() {
        thread::sleep(delay);
    }
    w.write_all(&encode(&msg))?;
    w.flush()?;
    Ok(msg)
}

fn expect_ack(r: &mut LineReader, timeout: Duration, ref_id: &str) -> Result<(Option<f64>, u32), NetError> {
    loop {
        let (m, _) = recv_blocking(r, timeout, "acknowledgement")?;
        match m.payload {
            Payload::Ack(a) if a.ref_id == ref_id => return Ok((a.latency_ms, a.events.unwrap_or(0))),
            Payload::Error(e) => return Err(NetError::Rejected(e)),
            other => log::debug!("ignoring {} while waiting for ack", other.type_name()),
        }
    }
}

/// Registers, then sends each frame stamped with the current wall clock.
pub fn run_sensor(
    addr: &str,
    cfg: &SensorConfig,
    frames: impl IntoIterator<Item = DetectionFrame>,
) -> Result<SensorReport, NetError> {
    let stream = connect(addr, cfg.connect_timeout)?;
    stream.set_read_timeout(Some(Duration::from_millis(50)))?;
    let mut writer = stream.try_clone()?;
    let mut reader = LineReader::new(stream);
    let reg = &cfg.registration;
    let zone = reg.zone.to_string();

    write_stamped(&mut writer, Payload::RegisterSensor(reg.clone()), Duration::ZERO)?;
    expect_ack(&mut reader, cfg.ack_timeout, &reg.device_id)?;
    log::info!("{}", log_line(now_ms(), Role::Sensor, "register_sensor", &reg.device_id, Some(&zone), None));

    let mut report = SensorReport::default();
    for (i, mut frame) in frames.into_iter().enumerate() {
        if i > 0 && !cfg.pace.is_zero() {
            thread::sleep(cfg.pace);
        }
        frame.sensor_id = reg.device_id.clone();
        frame.timestamp = now_ms();
        let ref_id = frame.frame_id.to_string();
        write_stamped(&mut writer, Payload::Frame(frame), cfg.inject_delay)?;
        let (latency, events) = expect_ack(&mut reader, cfg.ack_timeout, &ref_id)?;
        report.frames_sent += 1;
        report.events_raised += u64::from(events);
        if let Some(l) = latency {
            report.t_eval_ms.push(l);
        }
        log::info!("{}", log_line(now_ms(), Role::Sensor, "ack", &reg.device_id, Some(&zone), latency));
    }
    Ok(report)
}
