//! `serve`, `sensor` and `consumer`.

use std::path::PathBuf;
use std::time::Duration;

use anyhow::Result;
use clap::Args;
use serde::Serialize;
use sightline_core::budget::solve_network_budget;
use sightline_core::geo::{to_geodetic, Trajectory};
use sightline_core::net::{
    run_consumer, run_sensor, ConsumerConfig, ConsumerNotice, ProcessingConfig, ProcessingNode, ProcessingStats,
    SensorConfig,
};
use sightline_core::protocol::SensorRegistration;
use sightline_core::sim;
use sightline_core::stats::LatencyStats;

use crate::exit::{AlarmRaised, Invalid};
use crate::simulate::load_scenario;
use crate::Out;

const DEFAULT_ENDPOINT: &str = "127.0.0.1:7400";

/// Per-hop allocation from the default budget (25.205 ms).
fn default_hop_budget() -> f64 {
    solve_network_budget(150.0, 22.0, 76.39, 1.2)
        .map(|r| r.t_eval_alloc)
        .expect("default budget is feasible")
}

#[derive(Serialize)]
struct BudgetCheck {
    budget_ms: f64,
    /// Every sample at or under the allocation.
    within: bool,
}

fn check(stats: &Option<LatencyStats>, budget_ms: Option<f64>) -> Option<BudgetCheck> {
    let budget_ms = budget_ms.unwrap_or_else(default_hop_budget);
    stats.as_ref().map(|s| BudgetCheck {
        budget_ms,
        within: s.describe.max <= budget_ms,
    })
}

fn stats_line(name: &str, s: &Option<LatencyStats>, c: &Option<BudgetCheck>) -> String {
    match (s, c) {
        (Some(s), Some(c)) => {
            let d = &s.describe;
            let mut line = format!(
                "{name}: n {}, mean {:.3} ms, median {:.3} ms, max {:.3} ms; budget {:.3} ms {}\n",
                d.count,
                d.mean,
                d.median,
                d.max,
                c.budget_ms,
                if c.within { "PASS" } else { "FAIL" }
            );
            if s.clock_suspect {
                line.push_str(&format!(
                    "warning: {:.1} % of {name} samples are negative, clocks may be out of sync\n",
                    s.negative_fraction * 100.0
                ));
            }
            line
        }
        _ => format!("{name}: no samples\n"),
    }
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Address to listen on; port 0 picks a free port
    #[arg(long, default_value = DEFAULT_ENDPOINT)]
    listen: String,
    /// Stop after this many seconds and print statistics [default: run until killed]
    #[arg(long)]
    duration_s: Option<f64>,
    /// Box classes treated as emergency vehicles [default: emergency, ambulance, fire_truck, police]
    #[arg(long = "emergency-class")]
    emergency_classes: Vec<String>,
    /// Per-hop latency allocation for the report, ms [default: 25.205]
    #[arg(long)]
    budget_ms: Option<f64>,
}

#[derive(Serialize)]
struct ServeReport {
    frames: u64,
    events_sent: u64,
    events_dropped: u64,
    t_eval: Option<LatencyStats>,
    t_eval_check: Option<BudgetCheck>,
    t_exe: Option<LatencyStats>,
    t_exe_check: Option<BudgetCheck>,
}

impl ServeReport {
    fn of(s: &ProcessingStats, budget_ms: Option<f64>) -> Self {
        let (t_eval, t_exe) = (s.t_eval(), s.t_exe());
        Self {
            frames: s.frames,
            events_sent: s.events_sent,
            events_dropped: s.events_dropped,
            t_eval_check: check(&t_eval, budget_ms),
            t_exe_check: check(&t_exe, budget_ms),
            t_eval,
            t_exe,
        }
    }
}

pub fn serve(a: ServeArgs, out: &Out) -> Result<()> {
    let mut cfg = ProcessingConfig::default();
    if !a.emergency_classes.is_empty() {
        cfg.emergency_classes = a.emergency_classes.clone();
    }
    let node = ProcessingNode::bind(&a.listen, cfg)
        .map_err(|e| Invalid(format!("cannot listen on {}: {e}", a.listen)))?;
    let addr = node.local_addr()?;
    if out.json {
        out.json_line(&serde_json::json!({ "listening": addr.to_string(), "port": addr.port() }))?;
    } else {
        out.text(format!("listening on {addr}\n"))?;
    }
    let handle = node.spawn()?;
    let Some(secs) = a.duration_s else {
        handle.wait();
        return Ok(());
    };
    if !(secs.is_finite() && secs >= 0.0) {
        return Err(Invalid(format!("--duration-s must be >= 0, got {secs}")).into());
    }
    std::thread::sleep(Duration::from_secs_f64(secs));
    let r = ServeReport::of(&handle.shutdown(), a.budget_ms);
    if out.json {
        return out.json_line(&r);
    }
    out.text(format!(
        "frames {}, events sent {}, dropped {}\n{}{}",
        r.frames,
        r.events_sent,
        r.events_dropped,
        stats_line("t_eval", &r.t_eval, &r.t_eval_check),
        stats_line("t_exe", &r.t_exe, &r.t_exe_check)
    ))
}

#[derive(Args, Debug)]
pub struct SensorArgs {
    /// Processing node address
    #[arg(long, default_value = DEFAULT_ENDPOINT)]
    connect: String,
    /// Scenario TOML [default: built-in crossing scenario]
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Sensor id from the scenario [default: first sensor]
    #[arg(long)]
    id: Option<String>,
    /// Delay between frames, ms [default: the scenario's frame interval, 200]
    #[arg(long)]
    pace_ms: Option<f64>,
    /// Extra delay between stamping and sending each frame, ms
    #[arg(long, default_value_t = 0.0)]
    inject_delay_ms: f64,
    /// Stop after this many frames
    #[arg(long)]
    max_frames: Option<usize>,
    /// Address advertised for stream requests
    #[arg(long, default_value = "127.0.0.1:0")]
    socket_in: String,
    /// Uplink latency allocation, ms [default: 25.205]
    #[arg(long)]
    budget_ms: Option<f64>,
}

fn millis(name: &str, v: f64) -> Result<Duration> {
    if v.is_finite() && v >= 0.0 {
        Ok(Duration::from_secs_f64(v / 1000.0))
    } else {
        Err(Invalid(format!("{name} must be >= 0, got {v}")).into())
    }
}

#[derive(Serialize)]
struct SensorOutput {
    sensor_id: String,
    frames_sent: u64,
    events_raised: u64,
    t_eval: Option<LatencyStats>,
    t_eval_check: Option<BudgetCheck>,
}

pub fn sensor(a: SensorArgs, out: &Out) -> Result<()> {
    let sc = load_scenario(a.scenario.as_ref())?;
    let spec = match &a.id {
        Some(id) => sc.sensors.iter().find(|s| &s.id == id),
        None => sc.sensors.first(),
    }
    .ok_or_else(|| Invalid(format!("no sensor {:?} in the scenario", a.id.as_deref().unwrap_or(""))))?;
    let p = spec.position.to_cart(&sc.grid)?;
    let registration = SensorRegistration {
        device_id: spec.id.clone(),
        socket_in: a.socket_in.clone(),
        trajectory: spec.camera_bearing,
        zone: sc.grid.cell_of(p)?.name(),
        position: to_geodetic(p, sc.grid.origin)?,
        lane_zones: spec.lane_zones.clone(),
        beta: Some(spec.beta),
    };
    let mut cfg = SensorConfig::new(registration);
    cfg.pace = millis("--pace-ms", a.pace_ms.unwrap_or(sc.frame_interval_ms))?;
    cfg.inject_delay = millis("--inject-delay-ms", a.inject_delay_ms)?;
    let mut frames = sim::sensor_frames(&sc, &spec.id)?;
    if let Some(n) = a.max_frames {
        frames.truncate(n);
    }
    let report = run_sensor(&a.connect, &cfg, frames)?;
    let t_eval = report.t_eval();
    let o = SensorOutput {
        sensor_id: spec.id.clone(),
        frames_sent: report.frames_sent,
        events_raised: report.events_raised,
        t_eval_check: check(&t_eval, a.budget_ms),
        t_eval,
    };
    if out.json {
        return out.json_line(&o);
    }
    out.text(format!(
        "{}: sent {} frames, {} events raised\n{}",
        o.sensor_id,
        o.frames_sent,
        o.events_raised,
        stats_line("t_eval", &o.t_eval, &o.t_eval_check)
    ))
}

#[derive(Args, Debug)]
pub struct ConsumerArgs {
    /// Processing node address
    #[arg(long, default_value = DEFAULT_ENDPOINT)]
    connect: String,
    /// Scenario TOML [default: built-in crossing scenario]
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// User id from the scenario [default: first user]
    #[arg(long)]
    id: Option<String>,
    /// Scenario seconds per wall-clock second; 0 keeps the user at its start
    #[arg(long, default_value_t = 1.0)]
    time_scale: f64,
    /// Stop after this many events
    #[arg(long)]
    max_events: Option<usize>,
    /// Stop after this many seconds without an event
    #[arg(long)]
    idle_timeout_s: Option<f64>,
    /// Exit with code 5 if any Alarm was raised
    #[arg(long)]
    fail_on_alarm: bool,
    /// Address advertised for incoming events
    #[arg(long, default_value = "127.0.0.1:0")]
    socket_in: String,
    /// Downlink latency allocation, ms [default: 25.205]
    #[arg(long)]
    budget_ms: Option<f64>,
}

#[derive(Serialize)]
#[serde(tag = "notice", rename_all = "snake_case")]
enum NoticeLine<'a> {
    Registered { zone: String },
    ZoneChanged { zone: String },
    Verdict(&'a sightline_core::net::consumer::ConsumerVerdict),
    Discarded { event_id: &'a str, reason: &'a str },
}

#[derive(Serialize)]
struct ConsumerOutput {
    notice: &'static str,
    user_id: String,
    events: usize,
    alarms: usize,
    zone_updates: usize,
    t_exe: Option<LatencyStats>,
    t_exe_check: Option<BudgetCheck>,
}

pub fn consumer(a: ConsumerArgs, out: &Out) -> Result<()> {
    let sc = load_scenario(a.scenario.as_ref())?;
    let spec = match &a.id {
        Some(id) => sc.users.iter().find(|u| &u.id == id),
        None => sc.users.first(),
    }
    .ok_or_else(|| Invalid(format!("no user {:?} in the scenario", a.id.as_deref().unwrap_or(""))))?;
    if !(a.time_scale.is_finite() && a.time_scale >= 0.0) {
        return Err(Invalid(format!("--time-scale must be >= 0, got {}", a.time_scale)).into());
    }
    let trajectory = Trajectory::new(spec.position.to_cart(&sc.grid)?, spec.bearing, spec.speed)?;
    let mut cfg = ConsumerConfig::new(spec.id.clone(), sc.grid, trajectory);
    cfg.socket_in = a.socket_in.clone();
    cfg.time_scale = a.time_scale;
    cfg.max_events = a.max_events;
    cfg.idle_timeout = match a.idle_timeout_s {
        Some(s) => Some(millis("--idle-timeout-s", s * 1000.0)?),
        None => None,
    };

    let mut write_err = None;
    let mut on = |n: ConsumerNotice<'_>| {
        let r = if out.json {
            let line = match n {
                ConsumerNotice::Registered { zone } => NoticeLine::Registered { zone: zone.to_string() },
                ConsumerNotice::ZoneChanged { zone } => NoticeLine::ZoneChanged { zone: zone.to_string() },
                ConsumerNotice::Verdict(v) => NoticeLine::Verdict(v),
                ConsumerNotice::Discarded { event_id, reason } => NoticeLine::Discarded { event_id, reason },
            };
            out.json_line(&line)
        } else {
            out.text(match n {
                ConsumerNotice::Registered { zone } => format!("registered {} in {zone}\n", spec.id),
                ConsumerNotice::ZoneChanged { zone } => format!("zone {zone}\n"),
                ConsumerNotice::Verdict(v) => format!(
                    "{} event {} from {} (sensor {}, user {}) t_exe {:.3} ms: {}\n",
                    v.level, v.event_id, v.sensor_id, v.sensor_zone, v.user_zone, v.t_exe_ms, v.rationale
                ),
                ConsumerNotice::Discarded { event_id, reason } => {
                    format!("discarded event {event_id}: {reason}\n")
                }
            })
        };
        if let Err(e) = r {
            write_err.get_or_insert(e);
        }
    };
    let report = run_consumer(&a.connect, &cfg, &mut on)?;
    if let Some(e) = write_err {
        return Err(e);
    }
    let t_exe = report.t_exe();
    let o = ConsumerOutput {
        notice: "summary",
        user_id: spec.id.clone(),
        events: report.verdicts.len(),
        alarms: report.alarms(),
        zone_updates: report.zone_updates,
        t_exe_check: check(&t_exe, a.budget_ms),
        t_exe,
    };
    if out.json {
        out.json_line(&o)?;
    } else {
        out.text(format!(
            "{}: {} events, {} alarms, {} zone updates\n{}",
            o.user_id,
            o.events,
            o.alarms,
            o.zone_updates,
            stats_line("t_exe", &o.t_exe, &o.t_exe_check)
        ))?;
    }
    if a.fail_on_alarm && o.alarms > 0 {
        return Err(AlarmRaised(o.alarms).into());
    }
    Ok(())
}
