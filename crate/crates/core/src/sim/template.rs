//! Hand-laid TOML rendering of a scenario, with comments and inline tables
//! so the file stays easy to edit.

use std::fmt::Write;

use super::latency::LatencySpec;
use super::{Position, Scenario};
use crate::direction::Vote;

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn position(p: &Position) -> String {
    match p {
        Position::Cart { x, y } => format!("{{ x = {}, y = {} }}", num(*x), num(*y)),
        Position::Geo { lat, lon } => format!("{{ lat = {}, lon = {} }}", num(*lat), num(*lon)),
    }
}

fn spec(s: &LatencySpec) -> String {
    match s {
        LatencySpec::Constant { value } => format!("{{ kind = \"constant\", value = {} }}", num(*value)),
        LatencySpec::Uniform { lo, hi } => {
            format!("{{ kind = \"uniform\", lo = {}, hi = {} }}", num(*lo), num(*hi))
        }
        LatencySpec::Normal { mean, std } => {
            format!("{{ kind = \"normal\", mean = {}, std = {} }}", num(*mean), num(*std))
        }
        LatencySpec::Mixture { components } => {
            let parts: Vec<String> = components
                .iter()
                .map(|c| {
                    format!(
                        "{{ weight = {}, mean = {}, std = {} }}",
                        num(c.weight),
                        num(c.mean),
                        num(c.std)
                    )
                })
                .collect();
            format!("{{ kind = \"mixture\", components = [{}] }}", parts.join(", "))
        }
        LatencySpec::Empirical { file: Some(f), .. } => {
            format!("{{ kind = \"empirical\", file = {} }}", string(&f.to_string_lossy()))
        }
        LatencySpec::Empirical { file: None, samples } => {
            let xs: Vec<String> = samples.iter().map(|x| num(*x)).collect();
            format!("{{ kind = \"empirical\", samples = [{}] }}", xs.join(", "))
        }
    }
}

impl Scenario {
    pub fn to_toml(&self) -> String {
        let mut o = String::new();
        let w = &mut o;
        // writing to a String cannot fail
        let _ = writeln!(w, "# Positions are grid metres {{ x, y }} east and north of the grid origin,");
        let _ = writeln!(w, "# or geodetic {{ lat, lon }}. Bearings are compass degrees, speeds m/s.");
        let _ = writeln!(w, "seed = {}", self.seed);
        let _ = writeln!(w, "runs = {}", self.runs);
        let _ = writeln!(w, "duration_s = {}", num(self.duration_s));
        let _ = writeln!(w, "frame_interval_ms = {}", num(self.frame_interval_ms));
        let _ = writeln!(w, "t_max_ms = {}", num(self.t_max_ms));
        let _ = writeln!(w, "# residual impact speed per second of latency, m/s²");
        let _ = writeln!(w, "k_impact = {}", num(self.k_impact));
        let _ = writeln!(w, "detection_range_m = {}", num(self.detection_range_m));

        let g = &self.grid;
        let _ = writeln!(w, "\n[grid]");
        let _ = writeln!(w, "origin = {{ lat = {}, lon = {} }}", num(g.origin.lat), num(g.origin.lon));
        let _ = writeln!(w, "cell_size_m = {}", num(g.cell_size_m));

        let c = &self.camera;
        let _ = writeln!(w, "\n[camera]");
        let _ = writeln!(w, "width = {}", c.width);
        let _ = writeln!(w, "height = {}", c.height);
        let _ = writeln!(w, "focal_px = {}", num(c.focal_px));
        let _ = writeln!(w, "mount_height_m = {}", num(c.mount_height_m));
        let _ = writeln!(w, "fov_deg = {}", num(c.fov_deg));
        let _ = writeln!(w, "vehicle_width_m = {}", num(c.vehicle_width_m));
        let _ = writeln!(w, "vehicle_height_m = {}", num(c.vehicle_height_m));

        let _ = writeln!(w, "\n# Stage latencies, ms. Kinds: constant {{ value }}, uniform {{ lo, hi }},");
        let _ = writeln!(w, "# normal {{ mean, std }}, mixture {{ components = [{{ weight, mean, std }}] }},");
        let _ = writeln!(w, "# empirical {{ file }} or {{ samples }}. Negative draws are clipped to 0.");
        let _ = writeln!(w, "[latency]");
        for (name, s) in self.latency.stages() {
            let _ = writeln!(w, "{name} = {}", spec(s));
        }

        for s in &self.sensors {
            let _ = writeln!(w, "\n[[sensors]]");
            let _ = writeln!(w, "id = {}", string(&s.id));
            let _ = writeln!(w, "position = {}", position(&s.position));
            let _ = writeln!(w, "camera_bearing = {}", num(s.camera_bearing));
            let _ = writeln!(w, "beta = {}", num(s.beta));
            match &s.lane_zones {
                Some(zones) => {
                    let _ = writeln!(w, "lane_zones = [");
                    for z in zones {
                        let pts: Vec<String> =
                            z.polygon.iter().map(|[x, y]| format!("[{}, {}]", num(*x), num(*y))).collect();
                        let vote = match z.vote {
                            Vote::Toward => "toward",
                            Vote::Away => "away",
                        };
                        let _ = writeln!(w, "  {{ polygon = [{}], vote = \"{vote}\" }},", pts.join(", "));
                    }
                    let _ = writeln!(w, "]");
                }
                None => {
                    let _ = writeln!(w, "# lane_zones default to left half toward, right half away");
                }
            }
        }
        for u in &self.users {
            let _ = writeln!(w, "\n[[users]]");
            let _ = writeln!(w, "id = {}", string(&u.id));
            let _ = writeln!(w, "position = {}", position(&u.position));
            let _ = writeln!(w, "bearing = {}", num(u.bearing));
            let _ = writeln!(w, "speed = {}", num(u.speed));
        }
        for v in &self.emergency_vehicles {
            let _ = writeln!(w, "\n[[emergency_vehicles]]");
            let _ = writeln!(w, "id = {}", string(&v.id));
            let _ = writeln!(w, "class = {}", string(&v.class));
            let _ = writeln!(w, "position = {}", position(&v.position));
            let _ = writeln!(w, "bearing = {}", num(v.bearing));
            let _ = writeln!(w, "speed = {}", num(v.speed));
        }
        o
    }
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;
    use crate::direction::{LaneZone, VoteConfig};
    use crate::sim::LatencyModel;

    #[test]
    fn every_spec_kind_round_trips() {
        let mut sc = Scenario::crossing();
        sc.latency = LatencyModel {
            t_eval: LatencySpec::Uniform { lo: 20.0, hi: 30.5 },
            t_exe: LatencySpec::Normal { mean: 25.2, std: 3.0 },
            t_c: LatencySpec::Empirical {
                file: None,
                samples: vec![1.0, 1.25, 1e-7],
            },
            ..LatencyModel::measured()
        };
        sc.sensors[0].lane_zones = Some(VoteConfig::split_lanes(1920, 1080).zones);
        sc.users[0].id = "quote\"d".into();
        sc.emergency_vehicles[0].position = Position::Geo { lat: 46.63, lon: 14.31 };
        let back: Scenario = toml::from_str(&sc.to_toml()).unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn empirical_file_reference_is_kept() {
        let mut sc = Scenario::crossing();
        sc.latency.t_p_ai = LatencySpec::Empirical {
            file: Some("ai samples.txt".into()),
            samples: vec![],
        };
        let text = sc.to_toml();
        assert!(text.contains(r#"t_p_ai = { kind = "empirical", file = "ai samples.txt" }"#));
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("ai samples.txt"), "74.0\n75.5\n").unwrap();
        let sc = Scenario::from_toml_str(&text, dir.path()).unwrap();
        assert!(matches!(sc.latency.t_p_ai, LatencySpec::Empirical { ref samples, .. } if samples.len() == 2));
        assert!(Scenario::from_toml_str(&text, Path::new("/nonexistent")).is_err());
    }

    #[test]
    fn lane_zone_votes_render_lowercase() {
        let mut sc = Scenario::crossing();
        sc.sensors[0].lane_zones = Some(vec![LaneZone {
            polygon: vec![[0.0, 0.0], [10.0, 0.0], [10.0, 10.0]],
            vote: Vote::Away,
        }]);
        assert!(sc.to_toml().contains(r#"vote = "away""#));
    }
}
