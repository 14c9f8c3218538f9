//! Threat levels for one (user, sensor) pair.
//!
//! | level    | condition                                               |
//! |----------|---------------------------------------------------------|
//! | Alarm    | forward crossing inside C(U), C(U) = C(S), event active |
//! | Warning1 | forward crossing inside C(U), C(S) one of the 8 around  |
//! | Warning2 | C(U) = C(S), event active                               |
//! | None     | otherwise                                               |
//!
//! Levels are checked top to bottom and the first match wins.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{intersect, Intersection, IntersectionSolution, Trajectory};
use crate::grid::{self, cell_of, Cell, GridError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThreatError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("user cell {user} does not contain the user position")]
    StaleUserCell { user: String },
    #[error("sensor cell {sensor} does not contain the sensor position")]
    StaleSensorCell { sensor: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub id: String,
    pub trajectory: Trajectory,
    pub cell: Cell,
}

impl UserState {
    pub fn new(id: impl Into<String>, trajectory: Trajectory, cell_size: f64) -> Result<Self, GridError> {
        let cell = cell_of(trajectory.origin, cell_size)?;
        Ok(Self {
            id: id.into(),
            trajectory,
            cell,
        })
    }
}

/// The sensor's view of a detected object: the ray starts at the sensor and
/// points along the object's bearing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorState {
    pub id: String,
    pub trajectory: Trajectory,
    pub cell: Cell,
    pub event_active: bool,
}

impl SensorState {
    pub fn new(
        id: impl Into<String>,
        trajectory: Trajectory,
        cell_size: f64,
        event_active: bool,
    ) -> Result<Self, GridError> {
        let cell = cell_of(trajectory.origin, cell_size)?;
        Ok(Self {
            id: id.into(),
            trajectory,
            cell,
            event_active,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ThreatLevel {
    Alarm,
    Warning1,
    Warning2,
    None,
}

impl ThreatLevel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ThreatLevel::Alarm => "Alarm",
            ThreatLevel::Warning1 => "Warning1",
            ThreatLevel::Warning2 => "Warning2",
            ThreatLevel::None => "None",
        }
    }

    pub fn is_warning(&self) -> bool {
        matches!(self, ThreatLevel::Warning1 | ThreatLevel::Warning2)
    }
}

impl std::fmt::Display for ThreatLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatVerdict {
    pub level: ThreatLevel,
    pub intersection: Option<IntersectionSolution>,
    pub rationale: String,
}

fn check_consistent(u: &UserState, s: &SensorState) -> Result<(), ThreatError> {
    if u.cell.size != s.cell.size {
        return Err(GridError::SizeMismatch(u.cell.size, s.cell.size).into());
    }
    // cells may be stale by at most the closed-edge tie
    if !u.cell.contains_closed(u.trajectory.origin) {
        return Err(ThreatError::StaleUserCell { user: u.id.clone() });
    }
    if !s.cell.contains_closed(s.trajectory.origin) {
        return Err(ThreatError::StaleSensorCell { sensor: s.id.clone() });
    }
    Ok(())
}

pub fn classify(u: &UserState, s: &SensorState) -> Result<ThreatVerdict, ThreatError> {
    check_consistent(u, s)?;
    let crossing = intersect(&u.trajectory, &s.trajectory);
    let solution = crossing.solution().copied();
    let same_cell = u.cell.same_index(&s.cell);
    let in_user_cell = solution.is_some_and(|sol| grid::intra(sol.point, &u.cell));
    let user_name = u.cell.name();
    let sensor_name = s.cell.name();

    let (level, rationale) = if in_user_cell && same_cell && s.event_active {
        (
            ThreatLevel::Alarm,
            format!("trajectories cross inside {user_name}, sensor in the same cell"),
        )
    } else if in_user_cell && grid::inter(solution.unwrap().point, &u.cell, &s.cell) {
        (
            ThreatLevel::Warning1,
            format!("trajectories cross inside {user_name}, sensor in neighbouring {sensor_name}"),
        )
    } else if same_cell && s.event_active {
        (
            ThreatLevel::Warning2,
            format!("active sensor event in shared cell {user_name}"),
        )
    } else {
        let why = match crossing {
            Intersection::Parallel => "trajectories are parallel".to_string(),
            Intersection::Behind { .. } => "trajectories cross behind a start point".to_string(),
            Intersection::Point(_) if !in_user_cell => {
                format!("crossing lies outside {user_name}")
            }
            Intersection::Point(_) => format!("sensor cell {sensor_name} outside the 3x3 grid"),
        };
        (ThreatLevel::None, why)
    };
    Ok(ThreatVerdict {
        level,
        intersection: solution,
        rationale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Applicability {
    IntersectionEvent,
    ProximityEvent,
    NotApplicable,
}

/// Whether a sensor event is relevant to the user at all, before grading it.
pub fn applicability(u: &UserState, s: &SensorState) -> Applicability {
    let in_grid = |sol: &IntersectionSolution| {
        u.cell.contains_closed(sol.point)
            || u.cell.neighborhood().present().any(|c| c.contains_closed(sol.point))
    };
    if intersect(&u.trajectory, &s.trajectory)
        .solution()
        .is_some_and(in_grid)
    {
        Applicability::IntersectionEvent
    } else if grid::coexist(s.trajectory.origin, &u.cell) && s.event_active {
        Applicability::ProximityEvent
    } else {
        Applicability::NotApplicable
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::CartPoint;
    use crate::grid::CellName;

    const D: f64 = 1000.0;

    fn user(x: f64, y: f64, bearing: f64) -> UserState {
        UserState::new("u", Trajectory::new(CartPoint::new(x, y), bearing, 20.0).unwrap(), D).unwrap()
    }

    fn sensor(x: f64, y: f64, bearing: f64, event: bool) -> SensorState {
        SensorState::new("s", Trajectory::new(CartPoint::new(x, y), bearing, 0.0).unwrap(), D, event)
            .unwrap()
    }

    fn name(c: &Cell) -> String {
        c.name().to_string()
    }

    #[test]
    fn same_cell_crossing_is_alarm() {
        // B3 spans x 1000..2000, y 3000..4000
        let u = user(1500.0, 3100.0, 0.0);
        let s = sensor(1200.0, 3500.0, 90.0, true);
        assert_eq!(name(&u.cell), "B3");
        assert_eq!(name(&s.cell), "B3");
        let v = classify(&u, &s).unwrap();
        assert_eq!(v.level, ThreatLevel::Alarm);
        let p = v.intersection.unwrap().point;
        assert!((p.x - 1500.0).abs() < 1e-9 && (p.y - 3500.0).abs() < 1e-9);
    }

    #[test]
    fn neighbor_sensor_crossing_in_user_cell_is_warning1() {
        let u = user(1500.0, 3100.0, 0.0);
        // sensor in B4 looking down the road, object heading south
        let s = sensor(1400.0, 4200.0, 160.0, true);
        assert_eq!(name(&s.cell), "B4");
        let v = classify(&u, &s).unwrap();
        assert_eq!(v.level, ThreatLevel::Warning1);
        assert!(u.cell.contains_closed(v.intersection.unwrap().point));
    }

    #[test]
    fn parallel_rays_in_shared_cell_with_event_is_warning2() {
        let u = user(1500.0, 3100.0, 0.0);
        let s = sensor(1200.0, 3500.0, 0.0, true);
        let v = classify(&u, &s).unwrap();
        assert_eq!(v.level, ThreatLevel::Warning2);
        assert!(v.intersection.is_none());
    }

    #[test]
    fn far_sensor_is_none() {
        let u = user(1500.0, 3100.0, 0.0);
        let s = sensor(3500.0, 3500.0, 270.0, true);
        assert_eq!(name(&s.cell), "D3");
        let v = classify(&u, &s).unwrap();
        assert_eq!(v.level, ThreatLevel::None);
    }

    #[test]
    fn geometry_without_event_is_not_an_alarm() {
        let u = user(1500.0, 3100.0, 0.0);
        let s = sensor(1200.0, 3500.0, 90.0, false);
        assert_eq!(classify(&u, &s).unwrap().level, ThreatLevel::None);
    }

    #[test]
    fn alarm_dominates_warning2() {
        let u = user(1500.0, 3100.0, 0.0);
        let s = sensor(1200.0, 3500.0, 90.0, true);
        // both the crossing rule and the shared-cell event rule hold
        assert!(u.cell.same_index(&s.cell) && s.event_active);
        assert_eq!(classify(&u, &s).unwrap().level, ThreatLevel::Alarm);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let u = user(1500.0, 3100.0, 0.0);
        let mut s = sensor(1200.0, 3500.0, 90.0, true);
        s.cell.size = 500.0;
        assert!(matches!(classify(&u, &s), Err(ThreatError::Grid(GridError::SizeMismatch(..)))));
        let mut s = sensor(1200.0, 3500.0, 90.0, true);
        s.cell = CellName::parse("Z9").unwrap().to_cell(D);
        assert!(matches!(classify(&u, &s), Err(ThreatError::StaleSensorCell { .. })));
    }

    #[test]
    fn applicability_examples() {
        let u = user(1500.0, 3100.0, 0.0);
        assert_eq!(
            applicability(&u, &sensor(1200.0, 3500.0, 90.0, true)),
            Applicability::IntersectionEvent
        );
        // diverging: sensor ray heads west, away from the user's road
        assert_eq!(
            applicability(&u, &sensor(1200.0, 3500.0, 270.0, true)),
            Applicability::ProximityEvent
        );
        assert_eq!(
            applicability(&u, &sensor(5500.0, 8500.0, 270.0, true)),
            Applicability::NotApplicable
        );
    }

    #[test]
    fn activating_event_never_downgrades() {
        for (sx, sy) in [(1200.0, 3500.0), (1400.0, 4200.0), (3500.0, 3500.0), (1900.0, 3900.0)] {
            for b in (0..360).step_by(15) {
                let u = user(1500.0, 3100.0, 0.0);
                let off = classify(&u, &sensor(sx, sy, f64::from(b), false)).unwrap().level;
                let on = classify(&u, &sensor(sx, sy, f64::from(b), true)).unwrap().level;
                assert!(on <= off, "{off:?} -> {on:?} at ({sx},{sy}) bearing {b}");
            }
        }
    }
}
