//! Browser bindings for the threat classifier, the latency budget and the
//! impact curve. Every function returns a JSON string, or an error message.

use serde_json::json;
use sightline_core::budget::{impact_velocity, solve_network_budget_split};
use sightline_core::geo::{intersect, CartPoint, Trajectory};
use sightline_core::threat::{applicability, classify as grade, SensorState, UserState};
use wasm_bindgen::prelude::*;

fn msg(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Grade a sensor event against the user's trajectory on a local grid.
/// Positions are metres, headings are compass degrees.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn classify(
    ux: f64,
    uy: f64,
    u_bearing: f64,
    u_speed: f64,
    sx: f64,
    sy: f64,
    s_bearing: f64,
    event: bool,
    cell_size_m: f64,
) -> Result<String, String> {
    let ut = Trajectory::new(CartPoint::new(ux, uy), u_bearing, u_speed).map_err(msg)?;
    let st = Trajectory::new(CartPoint::new(sx, sy), s_bearing, 0.0).map_err(msg)?;
    let user = UserState::new("user", ut, cell_size_m).map_err(msg)?;
    let sensor = SensorState::new("sensor", st, cell_size_m, event).map_err(msg)?;
    let verdict = grade(&user, &sensor).map_err(msg)?;
    Ok(json!({
        "user_cell": user.cell.name().to_string(),
        "sensor_cell": sensor.cell.name().to_string(),
        "applicability": applicability(&user, &sensor),
        "intersection": intersect(&ut, &st),
        "verdict": verdict,
    })
    .to_string())
}

/// Split what the deadline leaves after the fixed stages between uplink and downlink.
#[wasm_bindgen]
pub fn budget(t_tot: f64, t_s: f64, t_p: f64, t_c: f64, uplink_share: f64) -> Result<String, String> {
    let r = solve_network_budget_split(t_tot, t_s, t_p, t_c, uplink_share).map_err(msg)?;
    serde_json::to_string(&r).map_err(msg)
}

/// Residual impact speed for each latency in ms.
#[wasm_bindgen]
pub fn impact(latencies_ms: &[f64], k: f64) -> Result<String, String> {
    let rows = latencies_ms
        .iter()
        .map(|&l| impact_velocity(l, k))
        .collect::<Result<Vec<_>, _>>()
        .map_err(msg)?;
    serde_json::to_string(&rows).map_err(msg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: Result<String, String>) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn classify_alarm() {
        let v = parse(classify(1400.0, 3400.0, 90.0, 20.0, 1700.0, 3700.0, 180.0, true, 1000.0));
        assert_eq!(v["verdict"]["level"], "Alarm");
        assert_eq!(v["user_cell"], "B3");
        assert_eq!(v["intersection"]["outcome"], "point");
        let v = parse(classify(1400.0, 3400.0, 90.0, 20.0, 1700.0, 3700.0, 180.0, false, 1000.0));
        assert_eq!(v["verdict"]["level"], "None");
    }

    #[test]
    fn classify_rejects_positions_off_the_grid() {
        assert!(classify(-1.0, 0.0, 0.0, 0.0, 10.0, 10.0, 0.0, true, 1000.0).is_err());
    }

    #[test]
    fn budget_split() {
        let v = parse(budget(150.0, 22.0, 76.39, 1.2, 0.5));
        assert!((v["t_eval_alloc"].as_f64().unwrap() - 25.205).abs() < 1e-9);
        assert!(budget(90.0, 22.0, 76.39, 1.2, 0.5).unwrap_err().contains("9.59"));
    }

    #[test]
    fn impact_rows() {
        let v = parse(impact(&[0.0, 200.0], 7.63));
        assert_eq!(v.as_array().unwrap().len(), 2);
        assert!((v[1]["mps"].as_f64().unwrap() - 1.526).abs() < 1e-9);
        assert!(impact(&[-1.0], 7.63).is_err());
    }
}
