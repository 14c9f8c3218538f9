//! `intersect` and `classify`.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};
use sightline_core::geo::{intersect as solve, GeoPoint, Intersection, Trajectory};
use sightline_core::grid::{GridConfig, DEFAULT_CELL_SIZE_M};
use sightline_core::sim::Position;
use sightline_core::threat::{applicability, classify as grade, Applicability, SensorState, ThreatVerdict, UserState};

use crate::exit::{AlarmRaised, Invalid};
use crate::{read_file, Out};

/// `a,b` pair of numbers.
#[derive(Debug, Clone, Copy)]
pub struct Pair(pub f64, pub f64);

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated numbers, got {s:?}"))?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        Ok(Pair(num(a)?, num(b)?))
    }
}

/// One ray in a scenario fragment. Angles as compass `bearing` degrees or
/// Cartesian `theta` radians.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RaySpec {
    #[serde(flatten)]
    pub position: Position,
    #[serde(default)]
    pub bearing: Option<f64>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub speed: f64,
}

/// Input file for `intersect` and `classify`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fragment {
    /// Needed when positions are geodetic.
    #[serde(default)]
    pub origin: Option<GeoPoint>,
    #[serde(default = "default_cell")]
    pub cell_size_m: f64,
    pub user: RaySpec,
    /// Ray from the sensor along the detected object's heading.
    pub sensor: RaySpec,
    #[serde(default = "yes")]
    pub event: bool,
}

fn default_cell() -> f64 {
    DEFAULT_CELL_SIZE_M
}

fn yes() -> bool {
    true
}

#[derive(Args, Debug)]
pub struct RayArgs {
    /// JSON fragment with user, sensor and optional origin, cell_size_m, event
    #[arg(long, conflicts_with_all = ["user", "sensor"])]
    input: Option<PathBuf>,
    /// User position x,y in metres (lat,lon with --origin)
    #[arg(long, allow_hyphen_values = true, required_unless_present = "input")]
    user: Option<Pair>,
    /// User heading, compass degrees
    #[arg(long, allow_hyphen_values = true, conflicts_with = "user_theta")]
    user_bearing: Option<f64>,
    /// User heading, Cartesian radians (0 = east, counter-clockwise)
    #[arg(long, allow_hyphen_values = true)]
    user_theta: Option<f64>,
    /// User speed, m/s
    #[arg(long, default_value_t = 0.0)]
    user_speed: f64,
    /// Sensor position x,y in metres (lat,lon with --origin)
    #[arg(long, allow_hyphen_values = true, required_unless_present = "input")]
    sensor: Option<Pair>,
    /// Detected object's heading, compass degrees; the ray starts at the sensor
    #[arg(long, allow_hyphen_values = true, conflicts_with = "sensor_theta")]
    sensor_bearing: Option<f64>,
    /// Detected object's heading, Cartesian radians
    #[arg(long, allow_hyphen_values = true)]
    sensor_theta: Option<f64>,
    /// Detected object's speed, m/s
    #[arg(long, default_value_t = 0.0)]
    sensor_speed: f64,
    /// Grid origin lat,lon; positions are then read as lat,lon
    #[arg(long, allow_hyphen_values = true)]
    origin: Option<Pair>,
    /// Grid cell edge, metres
    #[arg(long, default_value_t = DEFAULT_CELL_SIZE_M)]
    cell_size: f64,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    rays: RayArgs,
    /// Treat the sensor as having no active emergency event
    #[arg(long)]
    no_event: bool,
    /// Exit with code 5 when the verdict is Alarm
    #[arg(long)]
    fail_on_alarm: bool,
}

impl RayArgs {
    fn fragment(&self) -> Result<Fragment> {
        if let Some(path) = &self.input {
            let text = read_file(path)?;
            return serde_json::from_str(&text)
                .map_err(|e| Invalid(format!("{}: {e}", path.display())).into());
        }
        let pos = |p: Pair| match self.origin {
            Some(_) => Position::Geo { lat: p.0, lon: p.1 },
            None => Position::Cart { x: p.0, y: p.1 },
        };
        // clap guarantees both are present without --input
        let (user, sensor) = (self.user.expect("required"), self.sensor.expect("required"));
        Ok(Fragment {
            origin: self.origin.map(|Pair(lat, lon)| GeoPoint { lat, lon }),
            cell_size_m: self.cell_size,
            user: RaySpec {
                position: pos(user),
                bearing: self.user_bearing,
                theta: self.user_theta,
                speed: self.user_speed,
            },
            sensor: RaySpec {
                position: pos(sensor),
                bearing: self.sensor_bearing,
                theta: self.sensor_theta,
                speed: self.sensor_speed,
            },
            event: true,
        })
    }
}

fn ray(spec: &RaySpec, grid: &GridConfig, has_origin: bool, who: &str) -> Result<Trajectory> {
    if matches!(spec.position, Position::Geo { .. }) && !has_origin {
        return Err(Invalid(format!("{who}: geodetic position needs an origin")).into());
    }
    let p = spec.position.to_cart(grid)?;
    let tr = match (spec.bearing, spec.theta) {
        (Some(b), None) => Trajectory::new(p, b, spec.speed)?,
        (None, Some(t)) => Trajectory::from_theta(p, t, spec.speed)?,
        (None, None) => return Err(Invalid(format!("{who}: give a bearing or a theta")).into()),
        (Some(_), Some(_)) => return Err(Invalid(format!("{who}: bearing and theta are exclusive")).into()),
    };
    Ok(tr)
}

struct Resolved {
    user: Trajectory,
    sensor: Trajectory,
    grid: GridConfig,
    event: bool,
}

fn resolve(f: &Fragment) -> Result<Resolved> {
    let origin = match f.origin {
        Some(o) => GeoPoint::new(o.lat, o.lon)?,
        None => GeoPoint { lat: 0.0, lon: 0.0 },
    };
    let grid = GridConfig::new(origin, f.cell_size_m)?;
    Ok(Resolved {
        user: ray(&f.user, &grid, f.origin.is_some(), "user")?,
        sensor: ray(&f.sensor, &grid, f.origin.is_some(), "sensor")?,
        grid,
        event: f.event,
    })
}

fn describe(i: &Intersection) -> String {
    match i {
        Intersection::Point(s) => {
            let eta = |e: Option<f64>| e.map_or_else(|| "-".to_string(), |t| format!("{t:.3} s"));
            format!(
                "outcome  point\npoint    ({:.4}, {:.4})\nt_u      {:.4} m\nt_s      {:.4} m\neta_u    {}\neta_s    {}\n",
                s.point.x,
                s.point.y,
                s.t_u,
                s.t_s,
                eta(s.eta_u),
                eta(s.eta_s)
            )
        }
        Intersection::Parallel => "outcome  parallel\n".to_string(),
        Intersection::Behind { t_u, t_s } => {
            format!("outcome  behind\nt_u      {t_u:.4} m\nt_s      {t_s:.4} m\n")
        }
    }
}

#[derive(Serialize)]
struct IntersectOutput {
    user: Trajectory,
    sensor: Trajectory,
    intersection: Intersection,
}

pub fn intersect(a: RayArgs, out: &Out) -> Result<()> {
    let r = resolve(&a.fragment()?)?;
    let i = solve(&r.user, &r.sensor);
    if out.json {
        out.json(&IntersectOutput {
            user: r.user,
            sensor: r.sensor,
            intersection: i,
        })
    } else {
        out.text(describe(&i))
    }
}

#[derive(Serialize)]
struct ClassifyOutput {
    user_cell: String,
    sensor_cell: String,
    event: bool,
    applicability: Applicability,
    verdict: ThreatVerdict,
}

pub fn classify(a: ClassifyArgs, out: &Out) -> Result<()> {
    let mut f = a.rays.fragment()?;
    if a.no_event {
        f.event = false;
    }
    let r = resolve(&f)?;
    let d = r.grid.cell_size_m;
    let user = UserState::new("user", r.user, d)?;
    let sensor = SensorState::new("sensor", r.sensor, d, r.event)?;
    let verdict = grade(&user, &sensor)?;
    let level = verdict.level;
    let o = ClassifyOutput {
        user_cell: user.cell.name().to_string(),
        sensor_cell: sensor.cell.name().to_string(),
        event: r.event,
        applicability: applicability(&user, &sensor),
        verdict,
    };
    if out.json {
        out.json(&o)?;
    } else {
        out.text(format!(
            "{}\nuser cell {}, sensor cell {}, event {}\n{}\n",
            o.verdict.level,
            o.user_cell,
            o.sensor_cell,
            if o.event { "active" } else { "inactive" },
            o.verdict.rationale
        ))?;
    }
    if a.fail_on_alarm && level == sightline_core::threat::ThreatLevel::Alarm {
        return Err(AlarmRaised(1).into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_parse() {
        let p: Pair = "-5, 2.5".parse().unwrap();
        assert_eq!((p.0, p.1), (-5.0, 2.5));
        assert!("5".parse::<Pair>().is_err());
        assert!("a,1".parse::<Pair>().is_err());
    }

    #[test]
    fn fragment_reads_both_position_forms() {
        let f: Fragment = serde_json::from_str(
            r#"{"origin": {"lat": 46.62, "lon": 14.3},
                "user": {"lat": 46.63, "lon": 14.31, "bearing": 0, "speed": 20},
                "sensor": {"x": 5, "y": -5, "theta": 1.5707963267948966}}"#,
        )
        .unwrap();
        assert!(matches!(f.user.position, Position::Geo { .. }));
        assert!(matches!(f.sensor.position, Position::Cart { .. }));
        assert!(f.event);
        assert_eq!(f.cell_size_m, 1000.0);
        let r = resolve(&f).unwrap();
        assert!(r.user.origin.y > 1100.0);
    }
}
