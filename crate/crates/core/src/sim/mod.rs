//! Deterministic discrete-event simulation of the detection → dissemination
//! → local decision pipeline.
//!
//! Time is virtual (milliseconds). Each run draws its own stage latencies
//! from a ChaCha stream selected by `(seed, run)`, so results do not depend
//! on the host and runs can be replayed individually.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::{DEFAULT_K_IMPACT, DEFAULT_T_MAX_MS};
use crate::direction::{classify_box, object_bearing, DetectionFrame, Heading, LaneZone, VoteConfig, DEFAULT_BETA};
use crate::geo::{intersect, position_at, to_cartesian, CartPoint, GeoPoint, Intersection, Trajectory};
use crate::grid::{Cell, CellName, GridConfig};
use crate::threat::{classify, SensorState, ThreatLevel, UserState};

pub mod camera;
pub mod latency;
pub mod report;
mod template;

pub use camera::CameraModel;
pub use latency::{LatencyModel, LatencySpec};
pub use report::{export_csv, summarize, to_csv_string, StageSummary, Summary, CSV_HEADER};

pub const DEFAULT_FRAME_INTERVAL_MS: f64 = 200.0;
pub const DEFAULT_DETECTION_RANGE_M: f64 = 400.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("no records to summarize")]
    Empty,
}

/// Either grid-frame metres or a geodetic point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Position {
    Cart { x: f64, y: f64 },
    Geo { lat: f64, lon: f64 },
}

impl Position {
    pub fn to_cart(self, grid: &GridConfig) -> Result<CartPoint, SimError> {
        match self {
            Position::Cart { x, y } => Ok(CartPoint::new(x, y)),
            Position::Geo { lat, lon } => GeoPoint::new(lat, lon)
                .and_then(|g| to_cartesian(g, grid.origin))
                .map_err(|e| SimError::Validation(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub id: String,
    /// Compass bearing the camera faces.
    pub camera_bearing: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub position: Position,
    /// Defaults to a two-lane split of the frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane_zones: Option<Vec<LaneZone>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoverSpec {
    pub id: String,
    pub bearing: f64,
    /// m/s
    pub speed: f64,
    pub position: Position,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub id: String,
    #[serde(default = "default_class")]
    pub class: String,
    pub bearing: f64,
    /// m/s
    pub speed: f64,
    pub position: Position,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

fn default_class() -> String {
    "emergency".into()
}

fn default_runs() -> u32 {
    1
}

fn default_duration() -> f64 {
    10.0
}

fn default_interval() -> f64 {
    DEFAULT_FRAME_INTERVAL_MS
}

fn default_t_max() -> f64 {
    DEFAULT_T_MAX_MS
}

fn default_k() -> f64 {
    DEFAULT_K_IMPACT
}

fn default_range() -> f64 {
    DEFAULT_DETECTION_RANGE_M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_interval")]
    pub frame_interval_ms: f64,
    #[serde(default = "default_t_max")]
    pub t_max_ms: f64,
    /// Impact coefficient, m/s².
    #[serde(default = "default_k")]
    pub k_impact: f64,
    #[serde(default = "default_range")]
    pub detection_range_m: f64,
    pub grid: GridConfig,
    #[serde(default)]
    pub camera: CameraModel,
    #[serde(default)]
    pub latency: LatencyModel,
    pub sensors: Vec<SensorSpec>,
    pub users: Vec<MoverSpec>,
    #[serde(default)]
    pub emergency_vehicles: Vec<VehicleSpec>,
}

impl Scenario {
    /// Four-way crossing with one roadside camera: an ambulance approaches
    /// from the west, V2 comes up from the south with no line of sight and
    /// V1 drives west towards the ambulance.
    pub fn crossing() -> Self {
        let at = |x, y| Position::Cart { x, y };
        Self {
            seed: 42,
            runs: 1,
            duration_s: default_duration(),
            frame_interval_ms: DEFAULT_FRAME_INTERVAL_MS,
            t_max_ms: DEFAULT_T_MAX_MS,
            k_impact: DEFAULT_K_IMPACT,
            detection_range_m: DEFAULT_DETECTION_RANGE_M,
            grid: GridConfig {
                origin: GeoPoint { lat: 46.62, lon: 14.30 },
                cell_size_m: 1000.0,
            },
            camera: CameraModel::default(),
            latency: LatencyModel::reference(),
            sensors: vec![SensorSpec {
                id: "S1".into(),
                camera_bearing: 270.0,
                beta: DEFAULT_BETA,
                position: at(1420.0, 1510.0),
                lane_zones: None,
            }],
            users: vec![
                MoverSpec {
                    id: "V1".into(),
                    bearing: 270.0,
                    speed: 20.0,
                    position: at(1700.0, 1495.0),
                },
                MoverSpec {
                    id: "V2".into(),
                    bearing: 0.0,
                    speed: 20.0,
                    position: at(1495.0, 1100.0),
                },
            ],
            emergency_vehicles: vec![VehicleSpec {
                id: "E1".into(),
                class: default_class(),
                bearing: 90.0,
                speed: 20.0,
                position: at(1000.0, 1500.0),
            }],
        }
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, SimError> {
        let mut sc: Scenario = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        sc.latency.resolve(base_dir)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Validation(m));
        self.grid.validate().map_err(|e| SimError::Validation(e.to_string()))?;
        self.camera.validate().map_err(SimError::Validation)?;
        self.latency.validate()?;
        if self.sensors.is_empty() {
            return bad("at least one sensor is required".into());
        }
        if self.users.is_empty() {
            return bad("at least one user is required".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if !(self.frame_interval_ms > 0.0 && self.frame_interval_ms.is_finite()) {
            return bad(format!("frame_interval_ms must be > 0, got {}", self.frame_interval_ms));
        }
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration_s must be >= 0, got {}", self.duration_s));
        }
        if !(self.t_max_ms > 0.0) {
            return bad(format!("t_max_ms must be > 0, got {}", self.t_max_ms));
        }
        if !(self.k_impact >= 0.0 && self.k_impact.is_finite()) {
            return bad(format!("k_impact must be >= 0, got {}", self.k_impact));
        }
        if !(self.detection_range_m > 0.0) {
            return bad(format!("detection_range_m must be > 0, got {}", self.detection_range_m));
        }
        let mut ids = HashSet::new();
        let all_ids = self
            .sensors
            .iter()
            .map(|s| &s.id)
            .chain(self.users.iter().map(|u| &u.id))
            .chain(self.emergency_vehicles.iter().map(|v| &v.id));
        for id in all_ids {
            if id.is_empty() || !ids.insert(id) {
                return bad(format!("identifier {id:?} is empty or repeated"));
            }
        }
        for s in &self.sensors {
            let p = s.position.to_cart(&self.grid)?;
            self.grid
                .cell_of(p)
                .map_err(|e| SimError::Validation(format!("sensor {}: {e}", s.id)))?;
            Trajectory::new(p, s.camera_bearing, 0.0)
                .map_err(|e| SimError::Validation(format!("sensor {}: {e}", s.id)))?;
            if let Some(zones) = &s.lane_zones {
                VoteConfig::new(zones.clone(), s.beta)
                    .map_err(|e| SimError::Validation(format!("sensor {}: {e}", s.id)))?;
            } else if !(s.beta > 0.0 && s.beta < 1.0) {
                return bad(format!("sensor {}: beta must lie in (0, 1)", s.id));
            }
        }
        for u in &self.users {
            let p = u.position.to_cart(&self.grid)?;
            self.grid
                .cell_of(p)
                .map_err(|e| SimError::Validation(format!("user {}: {e}", u.id)))?;
            Trajectory::new(p, u.bearing, u.speed)
                .map_err(|e| SimError::Validation(format!("user {}: {e}", u.id)))?;
        }
        for v in &self.emergency_vehicles {
            let p = v.position.to_cart(&self.grid)?;
            Trajectory::new(p, v.bearing, v.speed)
                .map_err(|e| SimError::Validation(format!("vehicle {}: {e}", v.id)))?;
        }
        Ok(())
    }
}

/// Per-stage latencies of one end-to-end path, ms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageSample {
    pub t_s: f64,
    pub t_eval: f64,
    pub t_p_dec: f64,
    pub t_p_ai: f64,
    pub t_p_tc: f64,
    pub t_exe: f64,
    pub t_c: f64,
    pub t_act: f64,
}

impl StageSample {
    pub fn total(&self) -> f64 {
        self.t_s + self.t_eval + self.t_p_dec + self.t_p_ai + self.t_p_tc + self.t_exe + self.t_c + self.t_act
    }

    pub fn as_array(&self) -> [f64; 8] {
        [
            self.t_s,
            self.t_eval,
            self.t_p_dec,
            self.t_p_ai,
            self.t_p_tc,
            self.t_exe,
            self.t_c,
            self.t_act,
        ]
    }

    fn upstream(&self) -> f64 {
        self.t_s + self.t_eval + self.t_p_dec + self.t_p_ai + self.t_p_tc
    }
}

/// One event delivered to one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u32,
    pub event_id: String,
    pub sensor_id: String,
    pub vehicle_id: String,
    pub user_id: String,
    /// Frame capture time within the run, ms.
    pub t_capture_ms: f64,
    pub stages: StageSample,
    pub total: f64,
    pub verdict: ThreatLevel,
    pub met_deadline: bool,
    pub impact_mps: Option<f64>,
    /// Signed distance along the user's path to the crossing when the user
    /// is notified; `None` for parallel paths.
    pub distance_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClipCount {
    pub stage: String,
    pub clipped: u64,
    pub draws: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutput {
    pub records: Vec<RunRecord>,
    /// `None` when no event was raised.
    pub summary: Option<Summary>,
}

struct SensorRt {
    id: String,
    pos: CartPoint,
    bearing: f64,
    cell: Cell,
    votes: VoteConfig,
}

struct Mover {
    id: String,
    trajectory: Trajectory,
    class: String,
}

/// Scenario with every position resolved to the grid frame.
struct World<'a> {
    sc: &'a Scenario,
    sensors: Vec<SensorRt>,
    users: Vec<Mover>,
    vehicles: Vec<Mover>,
}

impl<'a> World<'a> {
    fn new(sc: &'a Scenario) -> Result<Self, SimError> {
        sc.validate()?;
        let g = &sc.grid;
        let cell_of = |p| g.cell_of(p).map_err(|e| SimError::Validation(e.to_string()));
        let traj = |p, b, v| Trajectory::new(p, b, v).map_err(|e| SimError::Validation(e.to_string()));
        let mut sensors = Vec::new();
        for s in &sc.sensors {
            let pos = s.position.to_cart(g)?;
            let votes = match &s.lane_zones {
                Some(z) => VoteConfig {
                    zones: z.clone(),
                    beta: s.beta,
                },
                None => VoteConfig {
                    beta: s.beta,
                    ..VoteConfig::split_lanes(sc.camera.width, sc.camera.height)
                },
            };
            sensors.push(SensorRt {
                id: s.id.clone(),
                pos,
                bearing: s.camera_bearing,
                cell: cell_of(pos)?,
                votes,
            });
        }
        let users = sc
            .users
            .iter()
            .map(|u| {
                Ok(Mover {
                    id: u.id.clone(),
                    trajectory: traj(u.position.to_cart(g)?, u.bearing, u.speed)?,
                    class: "car".into(),
                })
            })
            .collect::<Result<_, SimError>>()?;
        let vehicles = sc
            .emergency_vehicles
            .iter()
            .map(|v| {
                Ok(Mover {
                    id: v.id.clone(),
                    trajectory: traj(v.position.to_cart(g)?, v.bearing, v.speed)?,
                    class: v.class.clone(),
                })
            })
            .collect::<Result<_, SimError>>()?;
        Ok(Self {
            sc,
            sensors,
            users,
            vehicles,
        })
    }

    /// Frame seen by sensor `si` at `t_ms`, with the emergency vehicle index
    /// behind each emergency box.
    fn frame(&self, si: usize, t_ms: f64, frame_id: u64) -> (DetectionFrame, Vec<Option<usize>>) {
        let s = &self.sensors[si];
        let cam = &self.sc.camera;
        let mut boxes = Vec::new();
        let mut origin = Vec::new();
        let movers = self
            .vehicles
            .iter()
            .enumerate()
            .map(|(i, m)| (Some(i), m))
            .chain(self.users.iter().map(|m| (None, m)));
        for (vi, m) in movers {
            let p = position_at(&m.trajectory, t_ms / 1000.0).expect("validated trajectory");
            let bearing = m.trajectory.bearing;
            if let Some(b) = cam.project(s.pos, s.bearing, p, bearing, &m.class, self.sc.detection_range_m) {
                boxes.push(b);
                origin.push(vi);
            }
        }
        let frame = DetectionFrame {
            frame_id,
            sensor_id: s.id.clone(),
            timestamp: t_ms,
            width: cam.width,
            height: cam.height,
            boxes,
        };
        (frame, origin)
    }

    fn user_at(&self, ui: usize, t_ms: f64) -> Option<UserState> {
        let u = &self.users[ui];
        let p = position_at(&u.trajectory, t_ms / 1000.0).ok()?;
        UserState::new(u.id.clone(), u.trajectory.with_origin(p), self.sc.grid.cell_size_m).ok()
    }
}

/// Frames one sensor would emit over the scenario duration (no random phase).
pub fn sensor_frames(sc: &Scenario, sensor_id: &str) -> Result<Vec<DetectionFrame>, SimError> {
    let world = World::new(sc)?;
    let si = world
        .sensors
        .iter()
        .position(|s| s.id == sensor_id)
        .ok_or_else(|| SimError::Validation(format!("no sensor {sensor_id:?}")))?;
    let duration_ms = sc.duration_s * 1000.0;
    let mut frames = Vec::new();
    let mut k = 0u64;
    loop {
        let t = k as f64 * sc.frame_interval_ms;
        if t > duration_ms {
            break;
        }
        frames.push(world.frame(si, t, k).0);
        k += 1;
    }
    Ok(frames)
}

#[derive(Debug, Clone)]
enum Step {
    Capture {
        k: u64,
    },
    Disseminate {
        event: usize,
    },
    Deliver {
        event: usize,
        user: usize,
        t_exe: f64,
    },
    Act {
        event: usize,
        user: usize,
        stages: StageSample,
        verdict: ThreatLevel,
    },
}

struct Queued {
    t: f64,
    seq: u64,
    step: Step,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // min-heap on (time, insertion order)
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then(other.seq.cmp(&self.seq))
    }
}

struct SimEvent {
    id: String,
    sensor: usize,
    vehicle: usize,
    t_capture: f64,
    bearing: f64,
    upstream: StageSample,
}

struct RunState<'w, 'a> {
    world: &'w World<'a>,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Queued>,
    seq: u64,
    events: Vec<SimEvent>,
    clips: [ClipCount; 8],
}

impl RunState<'_, '_> {
    fn push(&mut self, t: f64, step: Step) {
        self.seq += 1;
        self.queue.push(Queued { t, seq: self.seq, step });
    }

    fn draw(&mut self, stage: usize) -> f64 {
        let spec = self.world.sc.latency.stages()[stage].1;
        let d = spec.sample(&mut self.rng);
        self.clips[stage].draws += 1;
        if d.clipped {
            self.clips[stage].clipped += 1;
        }
        d.value
    }
}

fn simulate_run(world: &World<'_>, run: u32, records: &mut Vec<RunRecord>, clips: &mut [ClipCount; 8]) {
    let sc = world.sc;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(u64::from(run));
    let phase = rng.gen_range(0.0..sc.frame_interval_ms);
    let mut st = RunState {
        world,
        rng,
        queue: BinaryHeap::new(),
        seq: 0,
        events: Vec::new(),
        clips: std::array::from_fn(|i| ClipCount {
            stage: latency::STAGES[i].to_string(),
            ..ClipCount::default()
        }),
    };
    let duration_ms = sc.duration_s * 1000.0;
    if phase <= duration_ms {
        st.push(phase, Step::Capture { k: 0 });
    }
    let mut detected = HashSet::new();
    let mut out = Vec::new();

    while let Some(Queued { t, step, .. }) = st.queue.pop() {
        match step {
            Step::Capture { k } => {
                for si in 0..world.sensors.len() {
                    let (frame, origin) = world.frame(si, t, k);
                    for (bbox, vi) in frame.boxes.iter().zip(&origin) {
                        let Some(vi) = *vi else { continue };
                        if detected.contains(&(si, vi)) {
                            continue;
                        }
                        let heading = classify_box(bbox, frame.height, &world.sensors[si].votes)
                            .map(|v| v.heading)
                            .unwrap_or(Heading::Away);
                        if heading != Heading::Toward {
                            continue;
                        }
                        detected.insert((si, vi));
                        let upstream = StageSample {
                            t_s: st.draw(0),
                            t_eval: st.draw(1),
                            t_p_dec: st.draw(2),
                            t_p_ai: st.draw(3),
                            t_p_tc: st.draw(4),
                            ..StageSample::default()
                        };
                        let event = st.events.len();
                        st.events.push(SimEvent {
                            id: format!("r{run}-{}-{}-f{k}", world.sensors[si].id, world.vehicles[vi].id),
                            sensor: si,
                            vehicle: vi,
                            t_capture: t,
                            bearing: object_bearing(world.sensors[si].bearing, heading),
                            upstream,
                        });
                        st.push(t + upstream.upstream(), Step::Disseminate { event });
                    }
                }
                let next = phase + (k + 1) as f64 * sc.frame_interval_ms;
                if next <= duration_ms {
                    st.push(next, Step::Capture { k: k + 1 });
                }
            }
            Step::Disseminate { event } => {
                let zone: CellName = world.sensors[st.events[event].sensor].cell.name();
                for ui in 0..world.users.len() {
                    let Some(u) = world.user_at(ui, t) else { continue };
                    if u.cell.name().within_3x3(&zone) {
                        let t_exe = st.draw(5);
                        st.push(t + t_exe, Step::Deliver { event, user: ui, t_exe });
                    }
                }
            }
            Step::Deliver { event, user, t_exe } => {
                let ev = &st.events[event];
                let s = &world.sensors[ev.sensor];
                let sensor_ray = Trajectory::new(s.pos, ev.bearing, 0.0).expect("validated");
                let verdict = world
                    .user_at(user, t)
                    .and_then(|u| {
                        let sensor = SensorState {
                            id: s.id.clone(),
                            trajectory: sensor_ray,
                            cell: s.cell,
                            event_active: true,
                        };
                        classify(&u, &sensor).ok()
                    })
                    .map_or(ThreatLevel::None, |v| v.level);
                let upstream = ev.upstream;
                let (t_c, t_act) = (st.draw(6), st.draw(7));
                let stages = StageSample {
                    t_exe,
                    t_c,
                    t_act,
                    ..upstream
                };
                st.push(t + stages.t_c + stages.t_act, Step::Act { event, user, stages, verdict });
            }
            Step::Act {
                event,
                user,
                stages,
                verdict,
            } => {
                let ev = &st.events[event];
                let total = stages.total();
                let met_deadline = total <= sc.t_max_ms;
                let t_notify = ev.t_capture + total;
                let s = &world.sensors[ev.sensor];
                let sensor_ray = Trajectory::new(s.pos, ev.bearing, 0.0).expect("validated");
                let u = &world.users[user];
                let p = position_at(&u.trajectory, t_notify / 1000.0).expect("validated");
                let distance_m = match intersect(&u.trajectory.with_origin(p), &sensor_ray) {
                    Intersection::Point(sol) => Some(sol.t_u),
                    Intersection::Behind { t_u, .. } => Some(t_u),
                    Intersection::Parallel => None,
                };
                let impact_mps = (!met_deadline && verdict == ThreatLevel::Alarm).then(|| sc.k_impact * total / 1000.0);
                out.push((
                    event,
                    user,
                    RunRecord {
                        run,
                        event_id: ev.id.clone(),
                        sensor_id: s.id.clone(),
                        vehicle_id: world.vehicles[ev.vehicle].id.clone(),
                        user_id: u.id.clone(),
                        t_capture_ms: ev.t_capture,
                        stages,
                        total,
                        verdict,
                        met_deadline,
                        impact_mps,
                        distance_m,
                    },
                ));
            }
        }
    }
    out.sort_by_key(|(e, u, _)| (*e, *u));
    records.extend(out.into_iter().map(|(_, _, r)| r));
    for (acc, c) in clips.iter_mut().zip(st.clips) {
        acc.clipped += c.clipped;
        acc.draws += c.draws;
    }
}

/// Runs every seeded repetition and summarizes the records.
pub fn run(sc: &Scenario) -> Result<SimOutput, SimError> {
    let world = World::new(sc)?;
    let mut records = Vec::new();
    let mut clips: [ClipCount; 8] = std::array::from_fn(|i| ClipCount {
        stage: latency::STAGES[i].to_string(),
        ..ClipCount::default()
    });
    for r in 0..sc.runs {
        simulate_run(&world, r, &mut records, &mut clips);
    }
    let summary = match summarize(&records) {
        Ok(mut s) => {
            s.runs = sc.runs;
            s.clipping = clips
                .into_iter()
                .filter(|c| c.draws > 0 && c.clipped as f64 / c.draws as f64 > 0.001)
                .collect();
            Some(s)
        }
        Err(SimError::Empty) => None,
        Err(e) => return Err(e),
    };
    Ok(SimOutput { records, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_scenario_round_trips_through_toml() {
        let sc = Scenario::crossing();
        let text = sc.to_toml();
        let back = Scenario::from_toml_str(&text, Path::new(".")).unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn geodetic_positions_are_accepted() {
        let mut sc = Scenario::crossing();
        let p = crate::geo::to_geodetic(CartPoint::new(1420.0, 1510.0), sc.grid.origin).unwrap();
        sc.sensors[0].position = Position::Geo { lat: p.lat, lon: p.lon };
        let text = sc.to_toml();
        let back = Scenario::from_toml_str(&text, Path::new(".")).unwrap();
        let c = back.sensors[0].position.to_cart(&back.grid).unwrap();
        assert!((c.x - 1420.0).abs() < 1e-6 && (c.y - 1510.0).abs() < 1e-6);
    }

    #[test]
    fn validation_errors() {
        let mut sc = Scenario::crossing();
        sc.users.clear();
        assert!(matches!(sc.validate(), Err(SimError::Validation(_))));
        let mut sc = Scenario::crossing();
        sc.sensors.clear();
        assert!(sc.validate().is_err());
        let mut sc = Scenario::crossing();
        sc.frame_interval_ms = 0.0;
        assert!(sc.validate().is_err());
        let mut sc = Scenario::crossing();
        sc.users[0].id = "S1".into();
        assert!(sc.validate().is_err());
        let mut sc = Scenario::crossing();
        sc.users[0].position = Position::Cart { x: -5.0, y: 10.0 };
        assert!(sc.validate().is_err());
        assert!(matches!(
            Scenario::from_toml_str("seed = \"x\"", Path::new(".")),
            Err(SimError::Parse(_))
        ));
    }

    #[test]
    fn reference_run_is_exact() {
        let out = run(&Scenario::crossing()).unwrap();
        assert_eq!(out.records.len(), 2);
        for r in &out.records {
            assert!((r.total - 149.99).abs() < 1e-9);
            assert!(r.met_deadline);
            assert!(r.impact_mps.is_none());
        }
        let level = |id: &str| out.records.iter().find(|r| r.user_id == id).unwrap().verdict;
        assert_eq!(level("V2"), ThreatLevel::Alarm);
        assert_eq!(level("V1"), ThreatLevel::Warning2);
    }

    #[test]
    fn slow_network_misses_the_deadline() {
        let mut sc = Scenario::crossing();
        sc.latency.t_eval = LatencySpec::constant(50.0);
        sc.latency.t_exe = LatencySpec::constant(50.0);
        let out = run(&sc).unwrap();
        let v2 = out.records.iter().find(|r| r.user_id == "V2").unwrap();
        assert!((v2.total - 199.59).abs() < 1e-9);
        assert!(!v2.met_deadline);
        let impact = v2.impact_mps.unwrap();
        assert!((impact - 7.63 * 0.19959).abs() < 1e-12);
        // only alarms carry an impact velocity
        let v1 = out.records.iter().find(|r| r.user_id == "V1").unwrap();
        assert!(!v1.met_deadline && v1.impact_mps.is_none());
    }

    #[test]
    fn one_event_per_vehicle_and_sensor() {
        let mut sc = Scenario::crossing();
        sc.runs = 5;
        let out = run(&sc).unwrap();
        assert_eq!(out.records.len(), 10);
        assert!(out.records.iter().all(|r| r.t_capture_ms >= 1000.0));
    }

    #[test]
    fn far_users_hear_nothing() {
        let mut sc = Scenario::crossing();
        sc.users[0].position = Position::Cart { x: 6500.0, y: 6500.0 };
        let out = run(&sc).unwrap();
        assert!(out.records.iter().all(|r| r.user_id == "V2"));
    }

    #[test]
    fn sensor_frames_cover_the_duration() {
        let sc = Scenario::crossing();
        let frames = sensor_frames(&sc, "S1").unwrap();
        assert_eq!(frames.len(), 51);
        assert!(frames[0].boxes.is_empty());
        assert!(frames.iter().any(|f| f.boxes.iter().any(|b| b.class_label == "emergency")));
        assert!(sensor_frames(&sc, "nope").is_err());
    }
}
