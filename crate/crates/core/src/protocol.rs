//! Line-oriented wire protocol between sensors, the processing node and
//! user equipment.
//!
//! Every message is one UTF-8 JSON object terminated by `\n`:
//!
//! ```text
//! {"v":1,"ts":1718000000123.25,"type":"register_user","body":{"device_id":"u-01","socket_in":"127.0.0.1:0","zone":"B3"}}
//! ```
//!
//! `ts` is the sender's wall clock in milliseconds since the Unix epoch,
//! stamped immediately before the write. Receivers use it for one-way
//! latency.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::direction::{DetectionFrame, Heading, LaneZone};
use crate::geo::GeoPoint;
use crate::grid::CellName;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("malformed message at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("embedded newline at byte {0}")]
    EmbeddedNewline(usize),
    #[error("unsupported protocol version {0}")]
    Version(u32),
    #[error("field {field:?} not allowed in a user-module message")]
    Privacy { field: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRegistration {
    pub device_id: String,
    /// `host:port` where the sensor accepts stream requests.
    pub socket_in: String,
    /// Compass bearing the camera faces.
    pub trajectory: f64,
    pub zone: CellName,
    pub position: GeoPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane_zones: Option<Vec<LaneZone>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

/// Deliberately position-free: the user only discloses its cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRegistration {
    pub device_id: String,
    pub socket_in: String,
    pub zone: CellName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneUpdate {
    pub device_id: String,
    pub zone: CellName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityHint {
    /// Hazard without a usable heading; users can only be warned.
    Proximity,
    /// Moving object with a bearing; users may compute a crossing.
    Intersection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventNotification {
    pub event_id: String,
    pub sensor_id: String,
    pub sensor_position: GeoPoint,
    pub object_bearing: f64,
    pub object_class: String,
    pub heading: Heading,
    pub zone: CellName,
    /// Capture time of the triggering frame, ms epoch.
    pub t_detect: f64,
    pub severity_hint: SeverityHint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    /// Identifier of the acknowledged message (frame id, event id, device id).
    pub ref_id: String,
    /// Receiver clock at arrival, ms epoch.
    pub t_receive: f64,
    /// One-way latency measured by the receiver, when it has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
    /// Events raised because of an acknowledged frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ErrorBody {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "body", rename_all = "snake_case")]
pub enum Payload {
    RegisterSensor(SensorRegistration),
    RegisterUser(UserRegistration),
    UpdateZone(ZoneUpdate),
    Frame(DetectionFrame),
    Event(EventNotification),
    Ack(Ack),
    Error(ErrorBody),
}

impl Payload {
    pub fn type_name(&self) -> &'static str {
        match self {
            Payload::RegisterSensor(_) => "register_sensor",
            Payload::RegisterUser(_) => "register_user",
            Payload::UpdateZone(_) => "update_zone",
            Payload::Frame(_) => "frame",
            Payload::Event(_) => "event",
            Payload::Ack(_) => "ack",
            Payload::Error(_) => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub v: u32,
    pub ts: f64,
    #[serde(flatten)]
    pub payload: Payload,
}

impl WireMessage {
    pub fn new(ts: f64, payload: Payload) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            ts,
            payload,
        }
    }
}

/// Serializes to one line, including the trailing `\n`.
pub fn encode(m: &WireMessage) -> Vec<u8> {
    // serde_json escapes control characters inside strings, so the only raw
    // newline is the terminator
    let mut out = serde_json::to_vec(m).expect("wire types always serialize");
    out.push(b'\n');
    out
}

pub fn encode_line(m: &WireMessage) -> String {
    String::from_utf8(encode(m)).expect("json is utf-8")
}

/// Parses one line. A single trailing `\n` (or `\r\n`) is accepted.
pub fn decode(bytes: &[u8]) -> Result<WireMessage, ProtocolError> {
    let line = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    if let Some(pos) = line.iter().position(|&b| b == b'\n') {
        return Err(ProtocolError::EmbeddedNewline(pos));
    }
    let msg: WireMessage = serde_json::from_slice(line).map_err(|e| ProtocolError::Malformed {
        offset: e.column().saturating_sub(1),
        reason: e.to_string(),
    })?;
    if msg.v != PROTOCOL_VERSION {
        return Err(ProtocolError::Version(msg.v));
    }
    Ok(msg)
}

/// Keys a user module must never send: anything locating or orienting it.
pub const USER_FORBIDDEN_KEYS: &[&str] = &[
    "lat",
    "lon",
    "latitude",
    "longitude",
    "position",
    "sensor_position",
    "x",
    "y",
    "bearing",
    "object_bearing",
    "trajectory",
    "theta",
    "heading",
    "speed",
    "velocity",
];

fn collect_keys(v: &Value, out: &mut BTreeSet<String>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                out.insert(k.clone());
                collect_keys(child, out);
            }
        }
        Value::Array(items) => items.iter().for_each(|c| collect_keys(c, out)),
        _ => {}
    }
}

/// Schema check applied to every message leaving a user module.
pub fn check_user_outbound(m: &WireMessage) -> Result<(), ProtocolError> {
    match m.payload {
        Payload::RegisterUser(_) | Payload::UpdateZone(_) | Payload::Ack(_) | Payload::Error(_) => {}
        _ => {
            return Err(ProtocolError::Privacy {
                field: format!("type={}", m.payload.type_name()),
            })
        }
    }
    check_user_outbound_json(&serde_json::to_value(m).expect("serializable"))
}

/// Same check on an already-encoded JSON value.
pub fn check_user_outbound_json(v: &Value) -> Result<(), ProtocolError> {
    let mut keys = BTreeSet::new();
    collect_keys(v, &mut keys);
    match keys.iter().find(|k| USER_FORBIDDEN_KEYS.contains(&k.as_str())) {
        Some(k) => Err(ProtocolError::Privacy { field: k.clone() }),
        None => Ok(()),
    }
}
