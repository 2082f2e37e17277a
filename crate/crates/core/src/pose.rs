//! Scene mapping and pose estimation for AR display.
//!
//! The user's eye sits `body_height` above the localized RP and looks along
//! a horizontal unit vector `f` derived from the compass heading (degrees
//! clockwise from `+z`). Virtual objects are expressed in the local frame
//! `L` with the eye as origin: `forward` along `f`, `right` along
//! `r = (f.z, 0, -f.x)` and `up` along `+y`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::geometry::Vec3;
use crate::map::{ReferencePoint, VirtualObject};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseConfig {
    pub body_height: f64,
    pub max_observe_distance: f64,
    /// Horizontal field of view in degrees.
    pub horizontal_fov: f64,
    /// Width over height.
    pub aspect_ratio: f64,
}

impl Default for PoseConfig {
    fn default() -> Self {
        Self { body_height: 1.6, max_observe_distance: 10.0, horizontal_fov: 60.0, aspect_ratio: 16.0 / 9.0 }
    }
}

impl PoseConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.body_height, self.max_observe_distance, self.aspect_ratio];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid_arg("pose parameters must be positive"));
        }
        if !(self.horizontal_fov > 0.0 && self.horizontal_fov < 180.0) {
            return Err(invalid_arg("horizontal_fov must lie in (0, 180) degrees"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyePose {
    pub eye: Vec3,
    pub facing: Vec3,
}

/// Visibility pyramid with its apex at the eye.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewFrustum {
    pub apex: Vec3,
    pub axis: Vec3,
    pub half_angle_h: f64,
    pub half_angle_v: f64,
    pub max_distance: f64,
}

/// Object coordinates in the eye-centered local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalPose {
    pub forward: f64,
    pub right: f64,
    pub up: f64,
    /// Signed horizontal angle from the facing direction, degrees, positive
    /// to the right.
    pub bearing: f64,
    pub distance: f64,
}

/// Unit facing vector for a compass heading in degrees.
pub fn facing_from_heading(heading: f64) -> Vec3 {
    let t = heading.rem_euclid(360.0).to_radians();
    Vec3::new(t.sin(), 0.0, t.cos())
}

/// Compass heading (degrees in `[0, 360)`) of a horizontal direction.
pub fn heading_from_facing(f: Vec3) -> f64 {
    f.x.atan2(f.z).to_degrees().rem_euclid(360.0)
}

impl EyePose {
    /// Eye pose for a position on the floor and a heading.
    pub fn at(floor_position: Vec3, heading: f64, cfg: &PoseConfig) -> Self {
        Self { eye: floor_position + Vec3::UP * cfg.body_height, facing: facing_from_heading(heading) }
    }

    pub fn heading(&self) -> f64 {
        heading_from_facing(self.facing)
    }

    /// Horizontal right-hand axis of the local frame.
    pub fn right_axis(&self) -> Vec3 {
        Vec3::new(self.facing.z, 0.0, -self.facing.x)
    }
}

/// Eye pose above `rp` looking along `heading`.
pub fn eye_pose(rp: &ReferencePoint, heading: f64, cfg: &PoseConfig) -> EyePose {
    EyePose::at(rp.position, heading, cfg)
}

pub fn build_frustum(pose: &EyePose, cfg: &PoseConfig) -> ViewFrustum {
    let half_h = (cfg.horizontal_fov / 2.0).to_radians();
    ViewFrustum {
        apex: pose.eye,
        axis: pose.facing,
        half_angle_h: half_h,
        half_angle_v: (half_h.tan() / cfg.aspect_ratio).atan(),
        max_distance: cfg.max_observe_distance,
    }
}

/// Expresses a world point in the local frame of `pose`.
pub fn to_local(pose: &EyePose, p: Vec3) -> LocalPose {
    let d = p - pose.eye;
    let forward = d.dot(pose.facing);
    let right = d.dot(pose.right_axis());
    let up = d.y;
    LocalPose {
        forward,
        right,
        up,
        bearing: right.atan2(forward).to_degrees(),
        distance: (forward * forward + right * right + up * up).sqrt(),
    }
}

/// Maps local coordinates back into the virtual (world) space.
pub fn from_local(pose: &EyePose, local: &LocalPose) -> Vec3 {
    pose.eye + pose.facing * local.forward + pose.right_axis() * local.right + Vec3::UP * local.up
}

impl ViewFrustum {
    pub fn contains_local(&self, l: &LocalPose) -> bool {
        l.forward > 0.0
            && l.distance <= self.max_distance
            && l.right.atan2(l.forward).abs() <= self.half_angle_h
            && l.up.atan2(l.forward).abs() <= self.half_angle_v
    }
}

/// Objects inside the frustum with their local poses, nearest first.
pub fn visible_objects(pose: &EyePose, frustum: &ViewFrustum, objects: &[VirtualObject]) -> Vec<(VirtualObject, LocalPose)> {
    let mut out: Vec<_> = objects
        .iter()
        .map(|o| (o, to_local(pose, o.position)))
        .filter(|(_, l)| frustum.contains_local(l))
        .map(|(o, l)| (o.clone(), l))
        .collect();
    out.sort_by(|a, b| a.1.distance.total_cmp(&b.1.distance).then(a.0.id.cmp(&b.0.id)));
    out
}
