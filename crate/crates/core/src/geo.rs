//! Local planar coordinates and the two-ray intersection solver.
//!
//! Geodetic positions are projected onto an east/north tangent plane anchored
//! at a deployment origin. Trajectories are forward rays in that plane; a user
//! ray and a sensor ray are intersected in closed form by Cramer's rule.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius used by the local projection, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Projection is refused beyond this latitude.
pub const MAX_PROJECTION_LAT: f64 = 85.0;

/// Rays whose direction determinant falls below this are treated as parallel.
pub const PARALLEL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180)")]
    Longitude(f64),
    #[error("latitude {0} too close to the pole for a local projection")]
    PolarProjection(f64),
    #[error("speed must be finite and non-negative, got {0}")]
    Speed(f64),
    #[error("non-finite value for {0}")]
    NonFinite(&'static str),
    #[error("elapsed time must be non-negative, got {0}")]
    NegativeElapsed(f64),
}

/// WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        let p = Self { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(GeoError::Latitude(self.lat));
        }
        if !(-180.0..180.0).contains(&self.lon) {
            return Err(GeoError::Longitude(self.lon));
        }
        Ok(())
    }
}

/// Meters east (`x`) and north (`y`) of a projection origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartPoint {
    pub x: f64,
    pub y: f64,
}

impl CartPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &CartPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

fn check_projectable(p: &GeoPoint) -> Result<(), GeoError> {
    p.validate()?;
    if p.lat.abs() >= MAX_PROJECTION_LAT {
        return Err(GeoError::PolarProjection(p.lat));
    }
    Ok(())
}

/// Wraps a longitude difference into [-180, 180) so patches spanning the
/// antimeridian stay contiguous.
fn wrap_delta_lon(d: f64) -> f64 {
    (d + 180.0).rem_euclid(360.0) - 180.0
}

/// Equirectangular projection of `p` onto the tangent plane at `origin`.
pub fn to_cartesian(p: GeoPoint, origin: GeoPoint) -> Result<CartPoint, GeoError> {
    check_projectable(&p)?;
    check_projectable(&origin)?;
    let d_lon = wrap_delta_lon(p.lon - origin.lon).to_radians();
    let d_lat = (p.lat - origin.lat).to_radians();
    Ok(CartPoint {
        x: EARTH_RADIUS_M * d_lon * origin.lat.to_radians().cos(),
        y: EARTH_RADIUS_M * d_lat,
    })
}

/// Inverse of [`to_cartesian`] for the same origin.
pub fn to_geodetic(c: CartPoint, origin: GeoPoint) -> Result<GeoPoint, GeoError> {
    check_projectable(&origin)?;
    if !c.is_finite() {
        return Err(GeoError::NonFinite("cartesian point"));
    }
    let lat = origin.lat + (c.y / EARTH_RADIUS_M).to_degrees();
    let d_lon = (c.x / (EARTH_RADIUS_M * origin.lat.to_radians().cos())).to_degrees();
    let lon = wrap_delta_lon(origin.lon + d_lon);
    GeoPoint::new(lat, lon)
}

/// Compass bearing (0 = north, clockwise) to a Cartesian angle in [0, 2π).
pub fn bearing_to_theta(bearing_deg: f64) -> f64 {
    normalize_angle(FRAC_PI_2 - bearing_deg.to_radians())
}

/// Cartesian angle back to a compass bearing in [0, 360).
pub fn theta_to_bearing(theta: f64) -> f64 {
    normalize_bearing((FRAC_PI_2 - theta).to_degrees())
}

pub fn normalize_bearing(deg: f64) -> f64 {
    let b = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if b >= 360.0 {
        0.0
    } else {
        b
    }
}

fn normalize_angle(rad: f64) -> f64 {
    let t = rad.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// A forward ray: start position, heading and ground speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub origin: CartPoint,
    /// Compass degrees in [0, 360).
    pub bearing: f64,
    /// Meters per second.
    pub speed: f64,
    /// Cartesian angle in radians, kept in sync with `bearing`.
    pub theta: f64,
}

impl Trajectory {
    pub fn new(origin: CartPoint, bearing: f64, speed: f64) -> Result<Self, GeoError> {
        if !origin.is_finite() {
            return Err(GeoError::NonFinite("origin"));
        }
        if !bearing.is_finite() {
            return Err(GeoError::NonFinite("bearing"));
        }
        if !(speed.is_finite() && speed >= 0.0) {
            return Err(GeoError::Speed(speed));
        }
        Ok(Self {
            origin,
            bearing: normalize_bearing(bearing),
            speed,
            theta: bearing_to_theta(bearing),
        })
    }

    /// Builds a trajectory from a Cartesian angle instead of a bearing.
    pub fn from_theta(origin: CartPoint, theta: f64, speed: f64) -> Result<Self, GeoError> {
        if !theta.is_finite() {
            return Err(GeoError::NonFinite("theta"));
        }
        let mut tr = Self::new(origin, theta_to_bearing(theta), speed)?;
        tr.theta = normalize_angle(theta);
        Ok(tr)
    }

    pub fn direction(&self) -> (f64, f64) {
        (self.theta.cos(), self.theta.sin())
    }

    /// Point `meters` along the ray.
    pub fn point_at_distance(&self, meters: f64) -> CartPoint {
        let (c, s) = self.direction();
        CartPoint::new(self.origin.x + meters * c, self.origin.y + meters * s)
    }

    /// Same heading and speed, starting at `origin`.
    pub fn with_origin(&self, origin: CartPoint) -> Self {
        Self { origin, ..*self }
    }
}

/// Position after travelling for `elapsed_s` seconds.
pub fn position_at(tr: &Trajectory, elapsed_s: f64) -> Result<CartPoint, GeoError> {
    if !elapsed_s.is_finite() {
        return Err(GeoError::NonFinite("elapsed"));
    }
    if elapsed_s < 0.0 {
        return Err(GeoError::NegativeElapsed(elapsed_s));
    }
    Ok(tr.point_at_distance(tr.speed * elapsed_s))
}

/// Where two forward rays meet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionSolution {
    /// Meters along the user ray.
    pub t_u: f64,
    /// Meters along the sensor ray.
    pub t_s: f64,
    pub point: CartPoint,
    /// Seconds until the user reaches `point`; `None` for a stationary user.
    pub eta_u: Option<f64>,
    pub eta_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Intersection {
    Point(IntersectionSolution),
    /// Direction vectors are (anti)parallel, including colinear rays.
    Parallel,
    /// The lines cross, but behind the start of at least one ray.
    Behind { t_u: f64, t_s: f64 },
}

impl Intersection {
    pub fn solution(&self) -> Option<&IntersectionSolution> {
        match self {
            Intersection::Point(s) => Some(s),
            _ => None,
        }
    }
}

fn eta(distance: f64, speed: f64) -> Option<f64> {
    (speed > 0.0).then(|| distance / speed)
}

/// Solves `P_u + t_u·d_u = P_s + t_s·d_s` for the two forward rays.
pub fn intersect(u: &Trajectory, s: &Trajectory) -> Intersection {
    let (cu, su) = u.direction();
    let (cs, ss) = s.direction();
    // | cu  -cs | |t_u|   |dx|
    // | su  -ss | |t_s| = |dy|
    let det = -cu * ss + su * cs;
    if det.abs() < PARALLEL_EPS {
        return Intersection::Parallel;
    }
    let dx = s.origin.x - u.origin.x;
    let dy = s.origin.y - u.origin.y;
    let t_u = (-dx * ss + cs * dy) / det;
    let t_s = (cu * dy - su * dx) / det;
    if t_u < 0.0 || t_s < 0.0 {
        return Intersection::Behind { t_u, t_s };
    }
    Intersection::Point(IntersectionSolution {
        t_u,
        t_s,
        point: u.point_at_distance(t_u),
        eta_u: eta(t_u, u.speed),
        eta_s: eta(t_s, s.speed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use sightline_testkit::geodesy::haversine_m;
    use std::f64::consts::PI;

    fn ray(x: f64, y: f64, theta: f64, speed: f64) -> Trajectory {
        Trajectory::from_theta(CartPoint::new(x, y), theta, speed).unwrap()
    }

    #[test]
    fn projection_identity_at_origin() {
        let o = GeoPoint::new(46.62, 14.30).unwrap();
        let c = to_cartesian(o, o).unwrap();
        assert_eq!(c, CartPoint::new(0.0, 0.0));
    }

    #[test]
    fn projection_matches_great_circle_distance() {
        let o = GeoPoint::new(0.0, 0.0).unwrap();
        let p = GeoPoint::new(0.01, 0.0).unwrap();
        let c = to_cartesian(p, o).unwrap();
        let gc = haversine_m(0.0, 0.0, 0.01, 0.0);
        assert!(c.x.abs() < 1e-9);
        assert!((c.y - gc).abs() < 0.5, "y={} gc={gc}", c.y);
        assert!((c.y - 1111.949).abs() < 1e-3);

        let o = GeoPoint::new(60.0, 0.0).unwrap();
        let p = GeoPoint::new(60.0, 0.01).unwrap();
        let c = to_cartesian(p, o).unwrap();
        let gc = haversine_m(60.0, 0.0, 60.0, 0.01);
        assert!((c.x - gc).abs() < 0.5, "x={} gc={gc}", c.x);
        assert!((c.x - 555.97).abs() < 0.01);
        assert!(c.y.abs() < 1e-9);
    }

    #[test]
    fn projection_rejects_bad_coordinates() {
        let o = GeoPoint { lat: 0.0, lon: 0.0 };
        assert!(matches!(
            to_cartesian(GeoPoint { lat: 91.0, lon: 0.0 }, o),
            Err(GeoError::Latitude(_))
        ));
        assert!(matches!(
            to_cartesian(GeoPoint { lat: 0.0, lon: 180.0 }, o),
            Err(GeoError::Longitude(_))
        ));
        assert!(matches!(
            to_cartesian(GeoPoint { lat: 86.0, lon: 0.0 }, o),
            Err(GeoError::PolarProjection(_))
        ));
    }

    #[test]
    fn compass_axes() {
        assert!((bearing_to_theta(0.0) - PI / 2.0).abs() < 1e-12);
        assert!(bearing_to_theta(90.0).abs() < 1e-12);
        assert!((bearing_to_theta(180.0) - 3.0 * PI / 2.0).abs() < 1e-12);
        assert!((bearing_to_theta(270.0) - PI).abs() < 1e-12);
        assert!((bearing_to_theta(-90.0) - PI).abs() < 1e-12);
        assert!((bearing_to_theta(450.0)).abs() < 1e-12);
    }

    #[test]
    fn perpendicular_axes_intersect_by_inspection() {
        let u = ray(0.0, 0.0, 0.0, 10.0);
        let s = ray(5.0, -5.0, PI / 2.0, 5.0);
        let sol = *intersect(&u, &s).solution().unwrap();
        assert!((sol.t_u - 5.0).abs() < 1e-12);
        assert!((sol.t_s - 5.0).abs() < 1e-12);
        assert!((sol.point.x - 5.0).abs() < 1e-12 && sol.point.y.abs() < 1e-12);
        assert!((sol.eta_u.unwrap() - 0.5).abs() < 1e-12);
        assert!((sol.eta_s.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_directions_are_parallel() {
        let u = ray(0.0, 0.0, 0.0, 1.0);
        let s = ray(0.0, 3.0, 0.0, 1.0);
        assert_eq!(intersect(&u, &s), Intersection::Parallel);
        // colinear rays are reported as parallel too
        let s = ray(10.0, 0.0, PI, 1.0);
        assert_eq!(intersect(&u, &s), Intersection::Parallel);
    }

    #[test]
    fn crossing_behind_either_ray() {
        let u = ray(0.0, 0.0, 0.0, 1.0);
        let s = ray(-5.0, -5.0, PI / 2.0, 1.0);
        assert!(matches!(intersect(&u, &s), Intersection::Behind { t_u, .. } if t_u < 0.0));
        let s = ray(5.0, 5.0, PI / 2.0, 1.0);
        assert!(matches!(intersect(&u, &s), Intersection::Behind { t_s, .. } if t_s < 0.0));
    }

    #[test]
    fn stationary_user_has_no_eta() {
        let u = ray(0.0, 0.0, 0.0, 0.0);
        let s = ray(5.0, -5.0, PI / 2.0, 0.0);
        let sol = intersect(&u, &s);
        assert_eq!(sol.solution().unwrap().eta_u, None);
    }

    #[test]
    fn position_at_scales_by_speed() {
        let tr = ray(0.0, 0.0, 0.0, 20.0);
        let p = position_at(&tr, 2.0).unwrap();
        assert!((p.x - 40.0).abs() < 1e-12 && p.y.abs() < 1e-12);
        assert_eq!(position_at(&tr, 0.0).unwrap(), tr.origin);
        let tr = ray(3.0, 4.0, PI / 2.0, 10.0);
        let p = position_at(&tr, 1.5).unwrap();
        assert!((p.x - 3.0).abs() < 1e-12 && (p.y - 19.0).abs() < 1e-12);
        assert!(matches!(
            position_at(&tr, -1.0),
            Err(GeoError::NegativeElapsed(_))
        ));
    }

    #[test]
    fn negative_speed_is_rejected() {
        assert!(Trajectory::new(CartPoint::default(), 0.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn returned_point_lies_on_both_rays(
            ux in -3000.0..3000.0f64, uy in -3000.0..3000.0f64, ub in 0.0..360.0f64,
            sx in -3000.0..3000.0f64, sy in -3000.0..3000.0f64, sb in 0.0..360.0f64,
        ) {
            let u = Trajectory::new(CartPoint::new(ux, uy), ub, 1.0).unwrap();
            let s = Trajectory::new(CartPoint::new(sx, sy), sb, 1.0).unwrap();
            if let Intersection::Point(sol) = intersect(&u, &s) {
                prop_assert!(sol.t_u >= 0.0 && sol.t_s >= 0.0);
                prop_assert!(u.point_at_distance(sol.t_u).distance(&sol.point) < 1e-6);
                prop_assert!(s.point_at_distance(sol.t_s).distance(&sol.point) < 1e-6);
            }
        }

        #[test]
        fn opposite_or_equal_headings_are_parallel(
            ux in -3000.0..3000.0f64, uy in -3000.0..3000.0f64,
            sx in -3000.0..3000.0f64, sy in -3000.0..3000.0f64,
            theta in 0.0..TAU, k in -3i32..=3,
        ) {
            let u = ray(ux, uy, theta, 1.0);
            let s = ray(sx, sy, theta + f64::from(k) * PI, 1.0);
            prop_assert_eq!(intersect(&u, &s), Intersection::Parallel);
        }

        #[test]
        fn bearing_round_trip(b in 0.0..360.0f64) {
            let t = bearing_to_theta(b);
            prop_assert!((0.0..TAU).contains(&t));
            let back = theta_to_bearing(t);
            let diff = (back - b).abs();
            prop_assert!(diff < 1e-9 || (360.0 - diff) < 1e-9);
        }

        // Equirectangular scale error grows like tan(lat) * north offset / R,
        // so 0.1 % over a 10 km patch centred on the origin holds up to ~50°.
        #[test]
        fn projection_preserves_local_distances(
            lat0 in -50.0..50.0f64, lon0 in -179.0..179.0f64,
            ax in -5_000.0..5_000.0f64, ay in -5_000.0..5_000.0f64,
            bx in -5_000.0..5_000.0f64, by in -5_000.0..5_000.0f64,
        ) {
            let o = GeoPoint::new(lat0, lon0).unwrap();
            let a = to_geodetic(CartPoint::new(ax, ay), o).unwrap();
            let b = to_geodetic(CartPoint::new(bx, by), o).unwrap();
            let ca = to_cartesian(a, o).unwrap();
            let cb = to_cartesian(b, o).unwrap();
            prop_assert!(ca.distance(&CartPoint::new(ax, ay)) < 1e-6);
            let planar = ca.distance(&cb);
            prop_assume!(planar > 100.0);
            let gc = haversine_m(a.lat, a.lon, b.lat, b.lon);
            prop_assert!((planar - gc).abs() / gc < 1e-3, "planar={planar} gc={gc}");
        }

        #[test]
        fn projection_error_follows_scale_bound(
            lat0 in -70.0..70.0f64, lon0 in -179.0..179.0f64,
            ax in -5_000.0..5_000.0f64, ay in -5_000.0..5_000.0f64,
            bx in -5_000.0..5_000.0f64, by in -5_000.0..5_000.0f64,
        ) {
            let o = GeoPoint::new(lat0, lon0).unwrap();
            let a = to_geodetic(CartPoint::new(ax, ay), o).unwrap();
            let b = to_geodetic(CartPoint::new(bx, by), o).unwrap();
            let planar = CartPoint::new(ax, ay).distance(&CartPoint::new(bx, by));
            prop_assume!(planar > 100.0);
            let gc = haversine_m(a.lat, a.lon, b.lat, b.lon);
            let bound = (lat0.abs() + 0.1).to_radians().tan() * 5_000.0 / EARTH_RADIUS_M + 1e-4;
            prop_assert!((planar - gc).abs() / gc < bound, "planar={planar} gc={gc} bound={bound}");
        }
    }
}
