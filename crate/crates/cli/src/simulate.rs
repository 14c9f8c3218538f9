//! `simulate`, `scenario` and `report`.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sightline_core::sim::{self, LatencyModel, RunRecord, Scenario, StageSample, Summary};
use sightline_core::stats::Histogram;
use sightline_core::threat::ThreatLevel;

use crate::exit::Invalid;
use crate::Out;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Profile {
    /// Constant stage latencies summing to 149.99 ms
    Reference,
    /// Measured distributions: inference mean 79.02 / median 74.49 ms, classification mean 0.95 ms
    Measured,
}

impl Profile {
    fn model(self) -> LatencyModel {
        match self {
            Profile::Reference => LatencyModel::reference(),
            Profile::Measured => LatencyModel::measured(),
        }
    }
}

pub fn load_scenario(path: Option<&PathBuf>) -> Result<Scenario> {
    match path {
        Some(p) => Ok(Scenario::load(p)?),
        None => Ok(Scenario::crossing()),
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario TOML [default: built-in crossing scenario]
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Override the scenario's run count
    #[arg(long)]
    runs: Option<u32>,
    /// Override the scenario's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the scenario's latency model with a preset
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    /// Write per-event records as CSV; `-` writes CSV to stdout instead of the summary
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn simulate(a: SimulateArgs, out: &Out) -> Result<()> {
    let mut sc = load_scenario(a.scenario.as_ref())?;
    if let Some(r) = a.runs {
        sc.runs = r;
    }
    if let Some(s) = a.seed {
        sc.seed = s;
    }
    if let Some(p) = a.profile {
        sc.latency = p.model();
    }
    let result = sim::run(&sc)?;
    match a.out.as_deref() {
        Some(p) if p.as_os_str() == "-" => {
            return out.text(sim::to_csv_string(&result.records));
        }
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            sim::export_csv(&result.records, BufWriter::new(f))?;
        }
        None => {}
    }
    match result.summary {
        Some(s) if out.json => out.json(&s),
        Some(s) => out.text(render_summary(&s, sc.t_max_ms)),
        None if out.json => out.json(&serde_json::json!({ "runs": sc.runs, "records": 0 })),
        None => out.text("no emergency vehicle was detected heading toward a sensor\n"),
    }
}

fn bars(h: &Histogram) -> String {
    let peak = h.counts.iter().copied().max().unwrap_or(0).max(1);
    let mut s = String::new();
    for (lo, hi, c) in h.bins() {
        if c == 0 {
            continue;
        }
        let n = (c * 40).div_ceil(peak) as usize;
        s.push_str(&format!("  [{lo:>7.1}, {hi:>7.1})  {c:>6}  {}\n", "#".repeat(n)));
    }
    s
}

pub fn render_summary(s: &Summary, t_max_ms: f64) -> String {
    let mut o = format!(
        "runs {}, records {}, within {t_max_ms} ms: {}/{}\n\n",
        s.runs, s.records, s.met_deadline, s.records
    );
    o.push_str(&format!(
        "{:<8} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
        "stage", "mean", "median", "stddev", "min", "max"
    ));
    for st in &s.stages {
        let d = &st.stats;
        o.push_str(&format!(
            "{:<8} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}\n",
            st.stage, d.mean, d.median, d.stddev, d.min, d.max
        ));
    }
    let verdicts: Vec<String> = s.verdicts.iter().map(|(k, v)| format!("{k} {v}")).collect();
    o.push_str(&format!("\nverdicts: {}\n", verdicts.join(", ")));
    if let Some(i) = &s.impact_mps {
        o.push_str(&format!(
            "late alarms: {}, residual impact mean {:.4} m/s, max {:.4} m/s\n",
            i.count, i.mean, i.max
        ));
    }
    for c in &s.clipping {
        o.push_str(&format!(
            "warning: {} clipped {} of {} draws at 0 ms\n",
            c.stage, c.clipped, c.draws
        ));
    }
    o.push_str(&format!("\nt_p_ai histogram ({} ms bins)\n", s.histogram_t_p_ai.width));
    o.push_str(&bars(&s.histogram_t_p_ai));
    o.push_str(&format!("\ntotal histogram ({} ms bins)\n", s.histogram_total.width));
    o.push_str(&bars(&s.histogram_total));
    o
}

#[derive(Subcommand, Debug)]
pub enum ScenarioCommand {
    /// Print a commented scenario file for the crossing layout
    Init {
        /// Latency preset
        #[arg(long, value_enum, default_value_t = Profile::Reference)]
        profile: Profile,
        /// Write to a file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file and list where everything sits on the grid
    Validate {
        /// Scenario TOML
        file: PathBuf,
    },
}

#[derive(Serialize)]
struct Placement {
    id: String,
    kind: &'static str,
    x: f64,
    y: f64,
    cell: String,
}

#[derive(Serialize)]
struct Validated {
    valid: bool,
    runs: u32,
    seed: u64,
    placements: Vec<Placement>,
}

pub fn scenario(c: ScenarioCommand, out: &Out) -> Result<()> {
    match c {
        ScenarioCommand::Init { profile, out: path } => {
            let sc = Scenario {
                latency: profile.model(),
                ..Scenario::crossing()
            };
            match path {
                Some(p) => std::fs::write(&p, sc.to_toml()).with_context(|| format!("writing {}", p.display())),
                None if out.json => out.json(&sc),
                None => out.text(sc.to_toml()),
            }
        }
        ScenarioCommand::Validate { file } => {
            let sc = Scenario::load(&file)?;
            let mut placements = Vec::new();
            let mut place = |id: &str, kind, pos: sim::Position| -> Result<()> {
                let p = pos.to_cart(&sc.grid)?;
                let cell = sc.grid.cell_of(p)?.name().to_string();
                placements.push(Placement {
                    id: id.to_string(),
                    kind,
                    x: p.x,
                    y: p.y,
                    cell,
                });
                Ok(())
            };
            for s in &sc.sensors {
                place(&s.id, "sensor", s.position)?;
            }
            for u in &sc.users {
                place(&u.id, "user", u.position)?;
            }
            for v in &sc.emergency_vehicles {
                place(&v.id, "emergency_vehicle", v.position)?;
            }
            let v = Validated {
                valid: true,
                runs: sc.runs,
                seed: sc.seed,
                placements,
            };
            if out.json {
                return out.json(&v);
            }
            let mut s = format!("{}: valid, {} run(s), seed {}\n", file.display(), v.runs, v.seed);
            for p in &v.placements {
                s.push_str(&format!(
                    "  {:<18} {:<6} ({:.1}, {:.1})  {}\n",
                    p.kind, p.id, p.x, p.y, p.cell
                ));
            }
            out.text(s)
        }
    }
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// CSV written by `simulate --out`
    csv: PathBuf,
    /// Deadline used for the headline, ms
    #[arg(long, default_value = "150")]
    t_max: f64,
}

#[derive(Debug, Deserialize)]
struct Row {
    run: u32,
    event_id: String,
    user_id: String,
    t_s: f64,
    t_eval: f64,
    t_p_dec: f64,
    t_p_ai: f64,
    t_p_tc: f64,
    t_exe: f64,
    t_c: f64,
    t_act: f64,
    total: f64,
    verdict: ThreatLevel,
    met_deadline: bool,
    impact_mps: Option<f64>,
    distance_m: Option<f64>,
}

impl From<Row> for RunRecord {
    fn from(r: Row) -> Self {
        RunRecord {
            run: r.run,
            event_id: r.event_id,
            sensor_id: String::new(),
            vehicle_id: String::new(),
            user_id: r.user_id,
            t_capture_ms: 0.0,
            stages: StageSample {
                t_s: r.t_s,
                t_eval: r.t_eval,
                t_p_dec: r.t_p_dec,
                t_p_ai: r.t_p_ai,
                t_p_tc: r.t_p_tc,
                t_exe: r.t_exe,
                t_c: r.t_c,
                t_act: r.t_act,
            },
            total: r.total,
            verdict: r.verdict,
            met_deadline: r.met_deadline,
            impact_mps: r.impact_mps,
            distance_m: r.distance_m,
        }
    }
}

pub fn report(a: ReportArgs, out: &Out) -> Result<()> {
    let mut reader = csv::Reader::from_path(&a.csv)
        .map_err(|e| Invalid(format!("cannot read {}: {e}", a.csv.display())))?;
    let mut records = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| Invalid(format!("{}: {e}", a.csv.display())))?;
        records.push(RunRecord::from(row));
    }
    let s = sim::summarize(&records)?;
    if out.json {
        out.json(&s)
    } else {
        out.text(render_summary(&s, a.t_max))
    }
}
