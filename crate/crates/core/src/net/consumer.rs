//! Consumer role (user equipment). The user's trajectory never leaves this
//! module; only its cell name is disclosed.

use std::io::Write;
use std::net::TcpStream;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::{connect, log_line, now_ms, LineReader, NetError, Recv, Role};
use crate::direction::Heading;
use crate::geo::{position_at, to_cartesian, Trajectory};
use crate::grid::{CellName, GridConfig};
use crate::protocol::{
    check_user_outbound, encode_line, Ack, EventNotification, Payload, UserRegistration, WireMessage,
    ZoneUpdate,
};
use crate::stats::LatencyStats;
use crate::threat::{classify, SensorState, ThreatLevel, ThreatVerdict, UserState};

#[derive(Debug, Clone)]
pub struct ConsumerConfig {
    pub device_id: String,
    pub socket_in: String,
    pub grid: GridConfig,
    /// Position and motion at start, in the grid frame.
    pub trajectory: Trajectory,
    /// Simulated seconds per wall-clock second; 0 keeps the user still.
    pub time_scale: f64,
    pub connect_timeout: Duration,
    /// Stop after this many verdicts.
    pub max_events: Option<usize>,
    /// Stop after this long without an event. Acks of our own zone
    /// updates do not count, so a fast mover still idles out.
    pub idle_timeout: Option<Duration>,
}

impl ConsumerConfig {
    pub fn new(device_id: impl Into<String>, grid: GridConfig, trajectory: Trajectory) -> Self {
        Self {
            device_id: device_id.into(),
            socket_in: "0.0.0.0:0".into(),
            grid,
            trajectory,
            time_scale: 0.0,
            connect_timeout: Duration::from_secs(2),
            max_events: None,
            idle_timeout: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsumerVerdict {
    pub event_id: String,
    pub sensor_id: String,
    pub level: ThreatLevel,
    pub rationale: String,
    pub user_zone: CellName,
    pub sensor_zone: CellName,
    pub t_exe_ms: f64,
}

#[derive(Debug)]
pub enum ConsumerNotice<'a> {
    Registered { zone: CellName },
    ZoneChanged { zone: CellName },
    Verdict(&'a ConsumerVerdict),
    Discarded { event_id: &'a str, reason: &'a str },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ConsumerReport {
    pub verdicts: Vec<ConsumerVerdict>,
    pub zone_updates: usize,
    /// Every line this module wrote to the network.
    pub outbound: Vec<String>,
}

impl ConsumerReport {
    pub fn alarms(&self) -> usize {
        self.verdicts.iter().filter(|v| v.level == ThreatLevel::Alarm).count()
    }

    pub fn t_exe(&self) -> Option<LatencyStats> {
        let xs: Vec<f64> = self.verdicts.iter().map(|v| v.t_exe_ms).collect();
        LatencyStats::from_samples(&xs)
    }
}

pub fn register_message(ts: f64, device_id: &str, socket_in: &str, zone: CellName) -> WireMessage {
    WireMessage::new(
        ts,
        Payload::RegisterUser(UserRegistration {
            device_id: device_id.to_string(),
            socket_in: socket_in.to_string(),
            zone,
        }),
    )
}

pub fn zone_update_message(ts: f64, device_id: &str, zone: CellName) -> WireMessage {
    WireMessage::new(
        ts,
        Payload::UpdateZone(ZoneUpdate {
            device_id: device_id.to_string(),
            zone,
        }),
    )
}

pub fn event_ack_message(ts: f64, event_id: &str, t_receive: f64, t_exe: f64) -> WireMessage {
    WireMessage::new(
        ts,
        Payload::Ack(Ack {
            ref_id: event_id.to_string(),
            t_receive,
            latency_ms: Some(t_exe),
            events: None,
        }),
    )
}

/// Rebuilds the sensor's view from an event and grades it against the user.
pub fn evaluate_event(
    grid: &GridConfig,
    user: &UserState,
    ev: &EventNotification,
) -> Result<ThreatVerdict, String> {
    let p = to_cartesian(ev.sensor_position, grid.origin).map_err(|e| e.to_string())?;
    let cell = grid.cell_of(p).map_err(|e| format!("sensor outside this grid: {e}"))?;
    if cell.name() != ev.zone {
        return Err(format!(
            "event zone {} but sensor position falls in {} of this grid",
            ev.zone,
            cell.name()
        ));
    }
    let trajectory = Trajectory::new(p, ev.object_bearing, 0.0).map_err(|e| e.to_string())?;
    let sensor = SensorState {
        id: ev.sensor_id.clone(),
        trajectory,
        cell,
        event_active: ev.heading == Heading::Toward,
    };
    classify(user, &sensor).map_err(|e| e.to_string())
}

struct Outbound {
    stream: TcpStream,
    lines: Vec<String>,
}

impl Outbound {
    /// Refuses to write anything that would leak position or motion.
    fn send(&mut self, msg: WireMessage) -> Result<(), NetError> {
        check_user_outbound(&msg)?;
        let line = encode_line(&msg);
        self.stream.write_all(line.as_bytes())?;
        self.stream.flush()?;
        self.lines.push(line);
        Ok(())
    }
}

fn user_state(cfg: &ConsumerConfig, started: Instant) -> Result<UserState, NetError> {
    let secs = started.elapsed().as_secs_f64() * cfg.time_scale;
    let pos = position_at(&cfg.trajectory, secs).map_err(|e| bad_state(e.to_string()))?;
    UserState::new(cfg.device_id.clone(), cfg.trajectory.with_origin(pos), cfg.grid.cell_size_m)
        .map_err(|e| bad_state(e.to_string()))
}

fn bad_state(msg: String) -> NetError {
    NetError::Io(std::io::Error::new(std::io::ErrorKind::InvalidInput, msg))
}

/// Registers, then grades every incoming event until a stop condition hits
/// or the processing node closes the connection.
pub fn run_consumer(
    addr: &str,
    cfg: &ConsumerConfig,
    on: &mut dyn FnMut(ConsumerNotice<'_>),
) -> Result<ConsumerReport, NetError> {
    let started = Instant::now();
    let mut zone = user_state(cfg, started)?.cell.name();
    let stream = connect(addr, cfg.connect_timeout)?;
    stream.set_read_timeout(Some(Duration::from_millis(20)))?;
    let mut out = Outbound {
        stream: stream.try_clone()?,
        lines: Vec::new(),
    };
    let mut reader = LineReader::new(stream);
    let mut report = ConsumerReport::default();
    out.send(register_message(now_ms(), &cfg.device_id, &cfg.socket_in, zone))?;

    let mut registered = false;
    let mut last_event = Instant::now();
    loop {
        if registered && cfg.time_scale > 0.0 {
            match user_state(cfg, started) {
                Ok(u) if u.cell.name() != zone => {
                    zone = u.cell.name();
                    out.send(zone_update_message(now_ms(), &cfg.device_id, zone))?;
                    report.zone_updates += 1;
                    on(ConsumerNotice::ZoneChanged { zone });
                }
                Ok(_) => {}
                Err(e) => log::debug!("position not on grid: {e}"),
            }
        }
        let (m, t_receive) = match reader.recv()? {
            Recv::Msg(m, t) => (m, t),
            Recv::Bad(e) => {
                log::warn!("{e}");
                continue;
            }
            Recv::Eof => break,
            Recv::Timeout => {
                if cfg.idle_timeout.is_some_and(|t| last_event.elapsed() >= t) {
                    break;
                }
                continue;
            }
        };
        let latency = t_receive - m.ts;
        match m.payload {
            Payload::Ack(a) if !registered && a.ref_id == cfg.device_id => {
                registered = true;
                log::info!(
                    "{}",
                    log_line(t_receive, Role::Consumer, "ack", &cfg.device_id, Some(&zone.to_string()), Some(latency))
                );
                on(ConsumerNotice::Registered { zone });
            }
            Payload::Ack(_) => {}
            Payload::Error(e) => return Err(NetError::Rejected(e)),
            Payload::Event(ev) => {
                last_event = Instant::now();
                let user = user_state(cfg, started)?;
                let verdict = evaluate_event(&cfg.grid, &user, &ev);
                out.send(event_ack_message(now_ms(), &ev.event_id, t_receive, latency))?;
                log::info!(
                    "{}",
                    log_line(t_receive, Role::Consumer, "event", &cfg.device_id, Some(&zone.to_string()), Some(latency))
                );
                match verdict {
                    Ok(v) => {
                        report.verdicts.push(ConsumerVerdict {
                            event_id: ev.event_id,
                            sensor_id: ev.sensor_id,
                            level: v.level,
                            rationale: v.rationale,
                            user_zone: user.cell.name(),
                            sensor_zone: ev.zone,
                            t_exe_ms: latency,
                        });
                        on(ConsumerNotice::Verdict(report.verdicts.last().expect("just pushed")));
                    }
                    Err(reason) => {
                        log::error!("event {}: {reason}", ev.event_id);
                        on(ConsumerNotice::Discarded {
                            event_id: &ev.event_id,
                            reason: &reason,
                        });
                    }
                }
                if cfg.max_events.is_some_and(|n| report.verdicts.len() >= n) {
                    break;
                }
            }
            other => log::debug!("ignoring {}", other.type_name()),
        }
    }
    report.outbound = out.lines;
    Ok(report)
}
