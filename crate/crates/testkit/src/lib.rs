//! Reference oracles for the test suites.
//!
//! Everything here works on raw numbers and never calls into
//! `sightline-core`, so an oracle cannot share a bug with the code it checks.

pub mod geodesy {
    /// Great-circle distance in meters on a sphere of radius 6 371 000 m.
    pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
        let r = 6_371_000.0_f64;
        let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
        let dp = p2 - p1;
        let dl = (lon2 - lon1).to_radians();
        let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * r * a.sqrt().asin()
    }
}

pub mod rays {
    //! Dense-sampling closest approach between two forward ray segments.

    /// Sampling step along the first ray, meters.
    pub const STEP: f64 = 0.01;

    #[derive(Debug, Clone, Copy)]
    pub struct Ray {
        pub x: f64,
        pub y: f64,
        /// Cartesian angle, radians.
        pub angle: f64,
    }

    impl Ray {
        fn at(&self, t: f64) -> (f64, f64) {
            (self.x + t * self.angle.cos(), self.y + t * self.angle.sin())
        }
    }

    #[derive(Debug, Clone, Copy)]
    pub struct Approach {
        /// Smallest sampled distance between the rays.
        pub distance: f64,
        /// Sample on the first ray achieving it.
        pub point: (f64, f64),
    }

    /// Distance from `p` to the segment `[0, len]` of `r`, by projection.
    fn dist_to_segment(p: (f64, f64), r: &Ray, len: f64) -> f64 {
        let (c, s) = (r.angle.cos(), r.angle.sin());
        let (dx, dy) = (p.0 - r.x, p.1 - r.y);
        let along = (dx * c + dy * s).clamp(0.0, len);
        let q = r.at(along);
        (p.0 - q.0).hypot(p.1 - q.1)
    }

    /// Samples `a` every [`STEP`] meters over `[0, len]` and returns the
    /// sample closest to the segment `[0, len]` of `b`.
    ///
    /// The distance from a point moving along a line to a convex set is
    /// convex, so a 1 m scan followed by a 0.01 m scan of the bracketing
    /// interval visits the same minimum as a full 0.01 m scan.
    pub fn closest_approach(a: &Ray, b: &Ray, len: f64) -> Approach {
        let f = |t: f64| dist_to_segment(a.at(t), b, len);
        let coarse = len.floor() as i64;
        let mut best_k = 0i64;
        let mut best = f64::INFINITY;
        for k in 0..=coarse {
            let d = f(k as f64);
            if d < best {
                best = d;
                best_k = k;
            }
        }
        let lo = ((best_k - 1).max(0) as f64 / STEP).round() as i64;
        let hi = (((best_k + 1) as f64).min(len) / STEP).round() as i64;
        let mut best_t = best_k as f64;
        for j in lo..=hi {
            let t = j as f64 * STEP;
            let d = f(t);
            if d < best {
                best = d;
                best_t = t;
            }
        }
        Approach {
            distance: best,
            point: a.at(best_t),
        }
    }
}

pub mod threat {
    //! Literal truth table for the three threat levels, on integer cell
    //! indices and a precomputed crossing point.

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Level {
        Alarm,
        Warning1,
        Warning2,
        None,
    }

    #[derive(Debug, Clone, Copy)]
    pub struct Case {
        pub user_cell: (i64, i64),
        pub sensor_cell: (i64, i64),
        pub cell_size: f64,
        /// Forward crossing point of the two rays, if any.
        pub crossing: Option<(f64, f64)>,
        pub event: bool,
    }

    fn inside_closed(p: (f64, f64), cell: (i64, i64), d: f64) -> bool {
        let (x0, y0) = (cell.0 as f64 * d, cell.1 as f64 * d);
        x0 <= p.0 && p.0 <= x0 + d && y0 <= p.1 && p.1 <= y0 + d
    }

    pub fn evaluate(c: &Case) -> Level {
        let same = c.user_cell == c.sensor_cell;
        let dx = (c.user_cell.0 - c.sensor_cell.0).abs();
        let dy = (c.user_cell.1 - c.sensor_cell.1).abs();
        let adjacent = !same && dx <= 1 && dy <= 1;
        let in_user_cell = c
            .crossing
            .map(|p| inside_closed(p, c.user_cell, c.cell_size))
            .unwrap_or(false);

        let alarm = in_user_cell && same && c.event;
        let warning1 = in_user_cell && adjacent;
        let warning2 = same && c.event;
        if alarm {
            Level::Alarm
        } else if warning1 {
            Level::Warning1
        } else if warning2 {
            Level::Warning2
        } else {
            Level::None
        }
    }
}

pub mod votes {
    /// Two-of-three majority over booleans, `true` meaning "toward".
    pub fn majority(a: bool, b: bool, c: bool) -> bool {
        (a && b) || (a && c) || (b && c)
    }
}

pub mod stats {
    /// Median by full sort, averaging the middle pair for even counts.
    pub fn median(xs: &[f64]) -> f64 {
        let mut v = xs.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    }

    pub fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::rays::*;

    #[test]
    fn crossing_rays_meet() {
        let a = Ray { x: 0.0, y: 0.0, angle: 0.0 };
        let b = Ray { x: 5.0, y: -5.0, angle: std::f64::consts::FRAC_PI_2 };
        let ap = closest_approach(&a, &b, 100.0);
        assert!(ap.distance < 1e-9);
        assert!((ap.point.0 - 5.0).abs() < 1e-9);
    }

    #[test]
    fn diverging_rays_stay_apart() {
        let a = Ray { x: 0.0, y: 0.0, angle: 0.0 };
        let b = Ray { x: 0.0, y: 3.0, angle: std::f64::consts::FRAC_PI_2 };
        let ap = closest_approach(&a, &b, 100.0);
        assert!((ap.distance - 3.0).abs() < 1e-9);
    }
}
