//! Single-frame driving direction from three ±1 cues.
//!
//! Each detector votes +1 (toward the camera) or −1 (away). Any detector that
//! cannot decide votes +1, so the combined result can only err toward an extra
//! warning. Votes are summed and `D >= 1` means toward.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::normalize_bearing;

/// Default bottom-band fraction for the emerging-from-bottom cue.
pub const DEFAULT_BETA: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DirectionError {
    #[error("no lane zones configured for this sensor")]
    NoZones,
    #[error("lane zone needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("lane zone polygon is self-intersecting")]
    SelfIntersecting,
    #[error("beta must lie strictly between 0 and 1, got {0}")]
    Beta(f64),
    #[error("frame dimensions must be positive")]
    FrameSize,
    #[error("box {index} is degenerate or outside the {width}x{height} frame")]
    BoxOutOfFrame { index: usize, width: u32, height: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    Front,
    Rear,
}

/// Detector output in pixels. `x`, `y` is the top-left corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub class_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view_label: Option<View>,
}

impl BoundingBox {
    /// Bottom-centre point, approximating where the vehicle meets the road.
    pub fn anchor(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h)
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    fn fits(&self, width: u32, height: u32) -> bool {
        let finite = [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite());
        finite
            && self.w > 0.0
            && self.h > 0.0
            && self.x >= 0.0
            && self.y >= 0.0
            && self.x + self.w <= f64::from(width)
            && self.y + self.h <= f64::from(height)
    }
}

/// One camera frame's worth of detections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrame {
    pub frame_id: u64,
    pub sensor_id: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: f64,
    pub width: u32,
    pub height: u32,
    pub boxes: Vec<BoundingBox>,
}

impl DetectionFrame {
    pub fn validate(&self) -> Result<(), DirectionError> {
        if self.width == 0 || self.height == 0 {
            return Err(DirectionError::FrameSize);
        }
        for (index, b) in self.boxes.iter().enumerate() {
            if !b.fits(self.width, self.height) {
                return Err(DirectionError::BoxOutOfFrame {
                    index,
                    width: self.width,
                    height: self.height,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vote {
    Toward,
    Away,
}

impl Vote {
    pub fn value(self) -> i32 {
        match self {
            Vote::Toward => 1,
            Vote::Away => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heading {
    Toward,
    Away,
}

/// Image region covering one direction of travel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneZone {
    pub polygon: Vec<[f64; 2]>,
    pub vote: Vote,
}

impl LaneZone {
    pub fn new(polygon: Vec<[f64; 2]>, vote: Vote) -> Result<Self, DirectionError> {
        let z = Self { polygon, vote };
        z.validate()?;
        Ok(z)
    }

    pub fn validate(&self) -> Result<(), DirectionError> {
        let n = self.polygon.len();
        if n < 3 {
            return Err(DirectionError::TooFewVertices(n));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                // skip edges that share a vertex
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a1, a2) = (self.polygon[i], self.polygon[(i + 1) % n]);
                let (b1, b2) = (self.polygon[j], self.polygon[(j + 1) % n]);
                if segments_cross(a1, a2, b1, b2) {
                    return Err(DirectionError::SelfIntersecting);
                }
            }
        }
        Ok(())
    }

    /// Even-odd ray casting.
    pub fn contains(&self, (px, py): (f64, f64)) -> bool {
        let poly = &self.polygon;
        let mut inside = false;
        let mut j = poly.len() - 1;
        for i in 0..poly.len() {
            let [xi, yi] = poly[i];
            let [xj, yj] = poly[j];
            if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_cross(a1: [f64; 2], a2: [f64; 2], b1: [f64; 2], b2: [f64; 2]) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(b1, b2, a1))
        || (d2 == 0.0 && on_segment(b1, b2, a2))
        || (d3 == 0.0 && on_segment(a1, a2, b1))
        || (d4 == 0.0 && on_segment(a1, a2, b2))
}

/// Static lane-zone cue: vote of the first zone holding the box anchor.
pub fn d_bb(bbox: &BoundingBox, zones: &[LaneZone]) -> Result<Vote, DirectionError> {
    if zones.is_empty() {
        return Err(DirectionError::NoZones);
    }
    let anchor = bbox.anchor();
    Ok(zones
        .iter()
        .find(|z| z.contains(anchor))
        .map_or(Vote::Toward, |z| z.vote))
}

/// Emerging-from-bottom cue: a box reaching into the bottom `beta` band is
/// moving away.
pub fn d_eb(bbox: &BoundingBox, frame_h: f64, beta: f64) -> Vote {
    if bbox.bottom() > (1.0 - beta) * frame_h {
        Vote::Away
    } else {
        Vote::Toward
    }
}

/// Front/rear view cue.
pub fn d_mod(bbox: &BoundingBox) -> Vote {
    match bbox.view_label {
        Some(View::Rear) => Vote::Away,
        Some(View::Front) | None => Vote::Toward,
    }
}

pub fn combine(v_bb: Vote, v_eb: Vote, v_mod: Vote) -> Heading {
    if v_bb.value() + v_eb.value() + v_mod.value() >= 1 {
        Heading::Toward
    } else {
        Heading::Away
    }
}

/// Per-sensor voting configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteConfig {
    pub zones: Vec<LaneZone>,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

impl VoteConfig {
    pub fn new(zones: Vec<LaneZone>, beta: f64) -> Result<Self, DirectionError> {
        let c = Self { zones, beta };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), DirectionError> {
        if self.zones.is_empty() {
            return Err(DirectionError::NoZones);
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(DirectionError::Beta(self.beta));
        }
        self.zones.iter().try_for_each(LaneZone::validate)
    }

    /// Two lanes split down the middle: left half toward, right half away
    /// (right-hand traffic seen from a roadside camera).
    pub fn split_lanes(width: u32, height: u32) -> Self {
        let (w, h) = (f64::from(width), f64::from(height));
        Self {
            zones: vec![
                LaneZone {
                    polygon: vec![[0.0, 0.0], [w / 2.0, 0.0], [w / 2.0, h], [0.0, h]],
                    vote: Vote::Toward,
                },
                LaneZone {
                    polygon: vec![[w / 2.0, 0.0], [w, 0.0], [w, h], [w / 2.0, h]],
                    vote: Vote::Away,
                },
            ],
            beta: DEFAULT_BETA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxVerdict {
    pub v_bb: Vote,
    pub v_eb: Vote,
    pub v_mod: Vote,
    pub heading: Heading,
}

pub fn classify_box(
    bbox: &BoundingBox,
    frame_h: u32,
    cfg: &VoteConfig,
) -> Result<BoxVerdict, DirectionError> {
    let v_bb = d_bb(bbox, &cfg.zones)?;
    let v_eb = d_eb(bbox, f64::from(frame_h), cfg.beta);
    let v_mod = d_mod(bbox);
    Ok(BoxVerdict {
        v_bb,
        v_eb,
        v_mod,
        heading: combine(v_bb, v_eb, v_mod),
    })
}

/// Compass bearing of a detected vehicle given the camera bearing: oncoming
/// vehicles travel opposite to where the camera looks.
pub fn object_bearing(camera_bearing: f64, heading: Heading) -> f64 {
    match heading {
        Heading::Toward => normalize_bearing(camera_bearing + 180.0),
        Heading::Away => normalize_bearing(camera_bearing),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use sightline_testkit::votes::majority;

    fn bx(x: f64, y: f64, w: f64, h: f64, view: Option<View>) -> BoundingBox {
        BoundingBox {
            x,
            y,
            w,
            h,
            class_label: "emergency".into(),
            view_label: view,
        }
    }

    fn zones() -> Vec<LaneZone> {
        VoteConfig::split_lanes(1920, 1080).zones
    }

    #[test]
    fn lane_zone_containment() {
        let z = zones();
        assert_eq!(d_bb(&bx(100.0, 400.0, 200.0, 100.0, None), &z).unwrap(), Vote::Toward);
        assert_eq!(d_bb(&bx(1200.0, 400.0, 200.0, 100.0, None), &z).unwrap(), Vote::Away);
    }

    #[test]
    fn anchor_outside_every_zone_falls_back_to_toward() {
        let z = vec![LaneZone::new(vec![[0.0, 0.0], [100.0, 0.0], [100.0, 100.0]], Vote::Away).unwrap()];
        assert_eq!(d_bb(&bx(500.0, 500.0, 10.0, 10.0, None), &z).unwrap(), Vote::Toward);
        assert_eq!(d_bb(&bx(0.0, 0.0, 1.0, 1.0, None), &[]), Err(DirectionError::NoZones));
    }

    #[test]
    fn bottom_band_threshold() {
        // (1 - 0.2) * 1080 = 864
        assert_eq!(d_eb(&bx(0.0, 900.0, 10.0, 100.0, None), 1080.0, 0.2), Vote::Away);
        assert_eq!(d_eb(&bx(0.0, 200.0, 10.0, 100.0, None), 1080.0, 0.2), Vote::Toward);
        assert_eq!(d_eb(&bx(0.0, 764.0, 10.0, 100.0, None), 1080.0, 0.2), Vote::Toward);
    }

    #[test]
    fn view_cue() {
        assert_eq!(d_mod(&bx(0.0, 0.0, 1.0, 1.0, Some(View::Front))), Vote::Toward);
        assert_eq!(d_mod(&bx(0.0, 0.0, 1.0, 1.0, Some(View::Rear))), Vote::Away);
        assert_eq!(d_mod(&bx(0.0, 0.0, 1.0, 1.0, None)), Vote::Toward);
    }

    #[test]
    fn combine_examples() {
        use Vote::*;
        assert_eq!(combine(Toward, Toward, Away), Heading::Toward);
        assert_eq!(combine(Away, Away, Away), Heading::Away);
        assert_eq!(combine(Toward, Away, Away), Heading::Away);
    }

    #[test]
    fn combine_is_two_of_three_majority() {
        let all = [Vote::Toward, Vote::Away];
        for a in all {
            for b in all {
                for c in all {
                    let expect = majority(a == Vote::Toward, b == Vote::Toward, c == Vote::Toward);
                    assert_eq!(combine(a, b, c) == Heading::Toward, expect);
                    for (p, q, r) in [(a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                        assert_eq!(combine(p, q, r), combine(a, b, c));
                    }
                }
            }
        }
    }

    #[test]
    fn zone_validation() {
        assert_eq!(
            LaneZone::new(vec![[0.0, 0.0], [1.0, 1.0]], Vote::Toward),
            Err(DirectionError::TooFewVertices(2))
        );
        // bow tie
        let bow = vec![[0.0, 0.0], [10.0, 10.0], [10.0, 0.0], [0.0, 10.0]];
        assert_eq!(LaneZone::new(bow, Vote::Toward), Err(DirectionError::SelfIntersecting));
        assert!(VoteConfig::new(zones(), 1.0).is_err());
        assert!(VoteConfig::new(zones(), 0.2).is_ok());
    }

    #[test]
    fn frame_validation() {
        let mut f = DetectionFrame {
            frame_id: 1,
            sensor_id: "s".into(),
            timestamp: 0.0,
            width: 100,
            height: 100,
            boxes: vec![bx(10.0, 10.0, 20.0, 20.0, None)],
        };
        assert!(f.validate().is_ok());
        f.boxes.push(bx(90.0, 10.0, 20.0, 20.0, None));
        assert!(matches!(f.validate(), Err(DirectionError::BoxOutOfFrame { index: 1, .. })));
        f.boxes[1].x = 10.0;
        f.boxes[1].w = 0.0;
        assert!(f.validate().is_err());
    }

    #[test]
    fn oncoming_vehicle_bearing() {
        assert_eq!(object_bearing(0.0, Heading::Toward), 180.0);
        assert_eq!(object_bearing(270.0, Heading::Toward), 90.0);
        assert_eq!(object_bearing(270.0, Heading::Away), 270.0);
    }

    proptest! {
        #[test]
        fn lowering_a_box_never_turns_away_into_toward(
            y in 0.0..900.0f64, h in 1.0..100.0f64, dy in 0.0..80.0f64, beta in 0.01..0.99f64,
        ) {
            let high = bx(0.0, y, 10.0, h, None);
            let low = bx(0.0, y + dy, 10.0, h, None);
            if d_eb(&high, 1080.0, beta) == Vote::Away {
                prop_assert_eq!(d_eb(&low, 1080.0, beta), Vote::Away);
            }
        }
    }
}
