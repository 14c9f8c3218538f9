//! Processing node: keeps the registry, votes on detection frames and
//! forwards events to every user in the 3×3 block around the sensor.

use std::collections::HashMap;
use std::io::{self, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::Serialize;
use ulid::Ulid;

use super::{log_line, now_ms, LineReader, Recv, Role};
use crate::direction::{classify_box, object_bearing, DetectionFrame, Heading, VoteConfig, DEFAULT_BETA};
use crate::grid::CellName;
use crate::protocol::{
    encode, Ack, ErrorBody, EventNotification, Payload, SensorRegistration, SeverityHint, WireMessage,
};
use crate::stats::LatencyStats;

const POLL: Duration = Duration::from_millis(50);
const RETRY_DELAY: Duration = Duration::from_millis(50);

#[derive(Debug, Clone)]
pub struct ProcessingConfig {
    /// Box classes that count as emergency vehicles.
    pub emergency_classes: Vec<String>,
}

impl Default for ProcessingConfig {
    fn default() -> Self {
        Self {
            emergency_classes: ["emergency", "ambulance", "fire_truck", "police"]
                .map(String::from)
                .to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ProcessingStats {
    pub frames: u64,
    pub events_sent: u64,
    pub events_dropped: u64,
    pub t_eval_ms: Vec<f64>,
    pub t_exe_ms: Vec<f64>,
}

impl ProcessingStats {
    pub fn t_eval(&self) -> Option<LatencyStats> {
        LatencyStats::from_samples(&self.t_eval_ms)
    }

    pub fn t_exe(&self) -> Option<LatencyStats> {
        LatencyStats::from_samples(&self.t_exe_ms)
    }
}

struct SensorEntry {
    reg: SensorRegistration,
    votes: Option<VoteConfig>,
}

struct UserEntry {
    zone: CellName,
    outbox: Sender<Payload>,
    conn: u64,
}

#[derive(Default)]
struct Registry {
    sensors: HashMap<String, SensorEntry>,
    users: HashMap<String, UserEntry>,
}

impl Registry {
    fn taken(&self, id: &str) -> bool {
        self.sensors.contains_key(id) || self.users.contains_key(id)
    }
}

struct Shared {
    config: ProcessingConfig,
    registry: Mutex<Registry>,
    stats: Mutex<ProcessingStats>,
    shutdown: AtomicBool,
    next_conn: AtomicU64,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

pub struct ProcessingNode {
    listener: TcpListener,
    shared: Arc<Shared>,
}

impl ProcessingNode {
    pub fn bind(addr: &str, config: ProcessingConfig) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(Self {
            listener,
            shared: Arc::new(Shared {
                config,
                registry: Mutex::default(),
                stats: Mutex::default(),
                shutdown: AtomicBool::new(false),
                next_conn: AtomicU64::new(1),
            }),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> io::Result<ProcessingHandle> {
        let addr = self.local_addr()?;
        let shared = Arc::clone(&self.shared);
        let thread = thread::Builder::new()
            .name("accept".into())
            .spawn(move || self.accept_loop())?;
        Ok(ProcessingHandle {
            addr,
            shared,
            thread,
        })
    }

    fn accept_loop(self) {
        let mut sessions = Vec::new();
        while !self.shared.shutdown.load(Ordering::Relaxed) {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    let shared = Arc::clone(&self.shared);
                    let conn = shared.next_conn.fetch_add(1, Ordering::Relaxed);
                    log::debug!("connection {conn} from {peer}");
                    let spawned = thread::Builder::new()
                        .name(format!("session-{conn}"))
                        .spawn(move || {
                            if let Err(e) = session(&shared, stream, conn) {
                                log::warn!("session {conn}: {e}");
                            }
                        });
                    match spawned {
                        Ok(h) => sessions.push(h),
                        Err(e) => log::error!("cannot spawn session: {e}"),
                    }
                    sessions.retain(|h| !h.is_finished());
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
                Err(e) => {
                    log::error!("accept failed: {e}");
                    thread::sleep(POLL);
                }
            }
        }
        for h in sessions {
            let _ = h.join();
        }
    }
}

pub struct ProcessingHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    thread: JoinHandle<()>,
}

impl ProcessingHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> ProcessingStats {
        lock(&self.shared.stats).clone()
    }

    pub fn registered(&self) -> (usize, usize) {
        let reg = lock(&self.shared.registry);
        (reg.sensors.len(), reg.users.len())
    }

    /// Blocks until the accept loop ends.
    pub fn wait(self) {
        let _ = self.thread.join();
    }

    pub fn shutdown(self) -> ProcessingStats {
        self.shared.shutdown.store(true, Ordering::Relaxed);
        let _ = self.thread.join();
        lock(&self.shared.stats).clone()
    }
}

enum Identity {
    Sensor(String),
    User(String),
}

fn session(shared: &Arc<Shared>, stream: TcpStream, conn: u64) -> io::Result<()> {
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(POLL))?;
    let (tx, rx) = mpsc::channel();
    let writer = {
        let stream = stream.try_clone()?;
        let shared = Arc::clone(shared);
        thread::Builder::new()
            .name(format!("writer-{conn}"))
            .spawn(move || writer_loop(&shared, stream, rx, conn))?
    };
    let mut reader = LineReader::new(stream);
    let mut identity = None;
    let result = loop {
        match reader.recv() {
            Ok(Recv::Msg(m, t)) => handle(shared, &mut identity, &tx, conn, m, t),
            Ok(Recv::Bad(e)) => {
                log::warn!("connection {conn}: {e}");
                let _ = tx.send(Payload::Error(ErrorBody::new("malformed", e.to_string())));
            }
            Ok(Recv::Timeout) if shared.shutdown.load(Ordering::Relaxed) => break Ok(()),
            Ok(Recv::Timeout) => {}
            Ok(Recv::Eof) => break Ok(()),
            Err(e) => break Err(e),
        }
    };
    {
        let mut reg = lock(&shared.registry);
        match &identity {
            Some(Identity::Sensor(id)) => {
                reg.sensors.remove(id);
            }
            Some(Identity::User(id)) => {
                if reg.users.get(id).is_some_and(|u| u.conn == conn) {
                    reg.users.remove(id);
                }
            }
            None => {}
        }
    }
    drop(tx);
    let _ = writer.join();
    result
}

/// Per-connection FIFO writer. A failed write is retried once, then the
/// message is dropped and the connection abandoned.
fn writer_loop(shared: &Shared, mut stream: TcpStream, rx: Receiver<Payload>, conn: u64) {
    for payload in rx.iter() {
        let is_event = matches!(payload, Payload::Event(_));
        let mut attempt = || {
            let msg = WireMessage::new(now_ms(), payload.clone());
            stream.write_all(&encode(&msg)).and_then(|()| stream.flush())
        };
        let outcome = attempt().or_else(|e| {
            log::debug!("connection {conn}: write failed ({e}), retrying");
            thread::sleep(RETRY_DELAY);
            attempt()
        });
        match outcome {
            Ok(()) if is_event => lock(&shared.stats).events_sent += 1,
            Ok(()) => {}
            Err(e) => {
                log::warn!("connection {conn}: dropping {} after retry: {e}", payload.type_name());
                if is_event {
                    lock(&shared.stats).events_dropped += 1;
                }
                lock(&shared.registry).users.retain(|_, u| u.conn != conn);
                let dropped = rx.try_iter().filter(|p| matches!(p, Payload::Event(_))).count();
                lock(&shared.stats).events_dropped += dropped as u64;
                let _ = stream.shutdown(std::net::Shutdown::Both);
                return;
            }
        }
    }
}

fn ack(ref_id: impl Into<String>, t_receive: f64, latency: f64, events: Option<u32>) -> Payload {
    Payload::Ack(Ack {
        ref_id: ref_id.into(),
        t_receive,
        latency_ms: Some(latency),
        events,
    })
}

fn handle(
    shared: &Shared,
    identity: &mut Option<Identity>,
    tx: &Sender<Payload>,
    conn: u64,
    m: WireMessage,
    t_in: f64,
) {
    let latency = t_in - m.ts;
    let reply = |p: Payload| {
        let _ = tx.send(p);
    };
    let error = |code: &str, msg: String| {
        log::warn!("connection {conn}: {code}: {msg}");
        let _ = tx.send(Payload::Error(ErrorBody::new(code, msg)));
    };
    let msg_type = m.payload.type_name();
    match m.payload {
        Payload::RegisterSensor(reg) => {
            if identity.is_some() {
                return error("already_registered", reg.device_id);
            }
            if reg.device_id.is_empty() {
                return error("invalid_registration", "empty device id".into());
            }
            let votes = match reg.lane_zones.clone() {
                Some(zones) => match VoteConfig::new(zones, reg.beta.unwrap_or(DEFAULT_BETA)) {
                    Ok(v) => Some(v),
                    Err(e) => return error("invalid_registration", e.to_string()),
                },
                None => None,
            };
            let mut registry = lock(&shared.registry);
            if registry.taken(&reg.device_id) {
                return error("duplicate_device", reg.device_id);
            }
            log::info!(
                "{}",
                log_line(t_in, Role::Processing, msg_type, &reg.device_id, Some(&reg.zone.to_string()), Some(latency))
            );
            let id = reg.device_id.clone();
            registry.sensors.insert(id.clone(), SensorEntry { reg, votes });
            *identity = Some(Identity::Sensor(id.clone()));
            reply(ack(id, t_in, latency, None));
        }
        Payload::RegisterUser(reg) => {
            if identity.is_some() {
                return error("already_registered", reg.device_id);
            }
            if reg.device_id.is_empty() {
                return error("invalid_registration", "empty device id".into());
            }
            let mut registry = lock(&shared.registry);
            if registry.taken(&reg.device_id) {
                return error("duplicate_device", reg.device_id);
            }
            log::info!(
                "{}",
                log_line(t_in, Role::Processing, msg_type, &reg.device_id, Some(&reg.zone.to_string()), Some(latency))
            );
            registry.users.insert(
                reg.device_id.clone(),
                UserEntry {
                    zone: reg.zone,
                    outbox: tx.clone(),
                    conn,
                },
            );
            *identity = Some(Identity::User(reg.device_id.clone()));
            reply(ack(reg.device_id, t_in, latency, None));
        }
        Payload::UpdateZone(up) => {
            let Some(Identity::User(id)) = identity.as_ref() else {
                return error("not_registered", up.device_id);
            };
            if *id != up.device_id {
                return error("device_mismatch", up.device_id);
            }
            if let Some(u) = lock(&shared.registry).users.get_mut(id) {
                u.zone = up.zone;
            }
            log::info!(
                "{}",
                log_line(t_in, Role::Processing, msg_type, id, Some(&up.zone.to_string()), Some(latency))
            );
            reply(ack(up.device_id, t_in, latency, None));
        }
        Payload::Frame(frame) => {
            let Some(Identity::Sensor(id)) = identity.as_ref() else {
                return error("unregistered_sensor", frame.sensor_id);
            };
            if *id != frame.sensor_id {
                return error("unregistered_sensor", frame.sensor_id);
            }
            if let Err(e) = frame.validate() {
                return error("invalid_frame", e.to_string());
            }
            {
                let mut stats = lock(&shared.stats);
                stats.frames += 1;
                stats.t_eval_ms.push(latency);
            }
            let sent = ingest_frame(shared, &frame);
            let zone = lock(&shared.registry)
                .sensors
                .get(id)
                .map(|s| s.reg.zone.to_string());
            log::info!(
                "{}",
                log_line(t_in, Role::Processing, msg_type, id, zone.as_deref(), Some(latency))
            );
            reply(ack(frame.frame_id.to_string(), t_in, latency, Some(sent)));
        }
        Payload::Ack(a) => {
            let device = match identity {
                Some(Identity::User(id) | Identity::Sensor(id)) => id.clone(),
                None => String::new(),
            };
            if let (Some(Identity::User(_)), Some(exe)) = (identity.as_ref(), a.latency_ms) {
                lock(&shared.stats).t_exe_ms.push(exe);
            }
            log::info!(
                "{}",
                log_line(t_in, Role::Processing, msg_type, &device, None, a.latency_ms)
            );
        }
        Payload::Error(e) => log::warn!("connection {conn}: peer error {}: {}", e.code, e.message),
        Payload::Event(_) => error("unexpected", "events are sent by the processing node".into()),
    }
}

/// Votes on every emergency box and disseminates the resulting events.
/// Returns the number of events raised.
fn ingest_frame(shared: &Shared, frame: &DetectionFrame) -> u32 {
    let registry = lock(&shared.registry);
    let Some(sensor) = registry.sensors.get(&frame.sensor_id) else {
        return 0;
    };
    let fallback;
    let votes = match &sensor.votes {
        Some(v) => v,
        None => {
            fallback = VoteConfig::split_lanes(frame.width, frame.height);
            &fallback
        }
    };
    let mut raised = 0;
    for bbox in &frame.boxes {
        if !shared.config.emergency_classes.contains(&bbox.class_label) {
            continue;
        }
        let verdict = match classify_box(bbox, frame.height, votes) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("frame {}: {e}", frame.frame_id);
                continue;
            }
        };
        if verdict.heading != Heading::Toward {
            continue;
        }
        raised += 1;
        let event = EventNotification {
            event_id: Ulid::new().to_string(),
            sensor_id: sensor.reg.device_id.clone(),
            sensor_position: sensor.reg.position,
            object_bearing: object_bearing(sensor.reg.trajectory, verdict.heading),
            object_class: bbox.class_label.clone(),
            heading: verdict.heading,
            zone: sensor.reg.zone,
            t_detect: frame.timestamp,
            severity_hint: SeverityHint::Intersection,
        };
        for (uid, user) in &registry.users {
            if user.zone.within_3x3(&sensor.reg.zone) {
                log::debug!("event {} -> {uid}", event.event_id);
                let _ = user.outbox.send(Payload::Event(event.clone()));
            }
        }
    }
    raised
}
