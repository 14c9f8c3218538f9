//! Pinhole roadside camera that turns ground positions into bounding boxes.

use serde::{Deserialize, Serialize};

use crate::direction::{BoundingBox, View};
use crate::geo::{bearing_to_theta, CartPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub width: u32,
    pub height: u32,
    pub focal_px: f64,
    /// Mounting height above the road, m.
    pub mount_height_m: f64,
    /// Horizontal field of view, degrees.
    pub fov_deg: f64,
    pub vehicle_width_m: f64,
    pub vehicle_height_m: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            width: 1920,
            height: 1080,
            focal_px: 1000.0,
            mount_height_m: 6.0,
            fov_deg: 90.0,
            vehicle_width_m: 2.5,
            vehicle_height_m: 2.5,
        }
    }
}

fn unit(bearing: f64) -> (f64, f64) {
    let th = bearing_to_theta(bearing);
    (th.cos(), th.sin())
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), String> {
        let ok = self.width > 0
            && self.height > 0
            && self.focal_px > 0.0
            && self.mount_height_m > 0.0
            && self.fov_deg > 0.0
            && self.fov_deg < 180.0
            && self.vehicle_width_m > 0.0
            && self.vehicle_height_m > 0.0;
        if ok {
            Ok(())
        } else {
            Err(format!("camera parameters out of range: {self:?}"))
        }
    }

    /// Box for an object at `obj` moving along `obj_bearing`, or `None` when
    /// it is behind the camera, outside the field of view, beyond `range_m`
    /// or clipped away entirely.
    pub fn project(
        &self,
        cam: CartPoint,
        cam_bearing: f64,
        obj: CartPoint,
        obj_bearing: f64,
        class_label: &str,
        range_m: f64,
    ) -> Option<BoundingBox> {
        let (fx, fy) = unit(cam_bearing);
        // right-hand side of the camera is a quarter turn clockwise
        let (rx, ry) = (fy, -fx);
        let (dx, dy) = (obj.x - cam.x, obj.y - cam.y);
        let z = dx * fx + dy * fy;
        let lateral = dx * rx + dy * ry;
        if z <= 0.0 || cam.distance(&obj) > range_m {
            return None;
        }
        if (lateral / z).abs() > (self.fov_deg.to_radians() / 2.0).tan() {
            return None;
        }
        let (w_img, h_img) = (f64::from(self.width), f64::from(self.height));
        let u = w_img / 2.0 + self.focal_px * lateral / z;
        let bottom = h_img / 2.0 + self.focal_px * self.mount_height_m / z;
        let w = self.focal_px * self.vehicle_width_m / z;
        let h = self.focal_px * self.vehicle_height_m / z;

        let x0 = (u - w / 2.0).clamp(0.0, w_img);
        let x1 = (u + w / 2.0).clamp(0.0, w_img);
        let y0 = (bottom - h).clamp(0.0, h_img);
        let y1 = bottom.clamp(0.0, h_img);
        if x1 <= x0 || y1 <= y0 {
            return None;
        }
        let (ox, oy) = unit(obj_bearing);
        let view = if ox * fx + oy * fy < 0.0 { View::Front } else { View::Rear };
        Some(BoundingBox {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
            class_label: class_label.to_string(),
            view_label: Some(view),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAM: CartPoint = CartPoint::new(1420.0, 1510.0);

    #[test]
    fn oncoming_vehicle_left_of_centre() {
        let c = CameraModel::default();
        let b = c
            .project(CAM, 270.0, CartPoint::new(1030.0, 1500.0), 90.0, "emergency", 400.0)
            .unwrap();
        // 390 m ahead and 10 m to the left
        assert!(b.x + b.w / 2.0 < 960.0);
        assert!((b.bottom() - (540.0 + 6000.0 / 390.0)).abs() < 1e-9);
        assert_eq!(b.view_label, Some(View::Front));
    }

    #[test]
    fn out_of_view() {
        let c = CameraModel::default();
        // behind the camera
        assert!(c.project(CAM, 270.0, CartPoint::new(1500.0, 1510.0), 90.0, "car", 400.0).is_none());
        // beyond range
        assert!(c.project(CAM, 270.0, CartPoint::new(1000.0, 1510.0), 90.0, "car", 400.0).is_none());
        // outside a 90 degree field of view
        assert!(c.project(CAM, 270.0, CartPoint::new(1400.0, 1600.0), 90.0, "car", 400.0).is_none());
    }

    #[test]
    fn receding_vehicle_shows_its_rear() {
        let c = CameraModel::default();
        let b = c
            .project(CAM, 270.0, CartPoint::new(1300.0, 1515.0), 270.0, "car", 400.0)
            .unwrap();
        assert_eq!(b.view_label, Some(View::Rear));
        assert!(b.x > 960.0);
    }

    #[test]
    fn boxes_stay_inside_the_frame() {
        let c = CameraModel::default();
        for z in [2.0, 5.0, 10.0, 50.0, 300.0] {
            if let Some(b) = c.project(CAM, 0.0, CartPoint::new(1421.0, 1510.0 + z), 180.0, "car", 400.0) {
                assert!(b.x >= 0.0 && b.y >= 0.0);
                assert!(b.x + b.w <= 1920.0 + 1e-9 && b.y + b.h <= 1080.0 + 1e-9);
            }
        }
    }
}
