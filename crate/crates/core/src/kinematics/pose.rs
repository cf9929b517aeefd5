//! Base pose and tangent-space pose deltas.
//!
//! A [`PoseDelta`] holds `[translation in the previous base frame, rotation
//! vector]`, i.e. the coordinates of `prev⁻¹ ∘ curr`.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasePose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Default for BasePose {
    fn default() -> Self {
        Self::identity()
    }
}

impl BasePose {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    pub fn from_xyz_rpy(xyz: [f64; 3], roll: f64, pitch: f64, yaw: f64) -> Self {
        Self {
            position: Vector3::from(xyz),
            orientation: UnitQuaternion::from_euler_angles(roll, pitch, yaw),
        }
    }

    pub fn rpy(&self) -> (f64, f64, f64) {
        self.orientation.euler_angles()
    }

    pub fn yaw(&self) -> f64 {
        self.rpy().2
    }

    /// Point in the base frame → world frame.
    pub fn to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation * p
    }

    /// World point → base frame.
    pub fn to_base(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.inverse() * (p - self.position)
    }
}

/// Serialized form of a pose (position + quaternion `[w, x, y, z]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub position: [f64; 3],
    pub quaternion: [f64; 4],
}

impl From<&BasePose> for PoseRecord {
    fn from(p: &BasePose) -> Self {
        let q = p.orientation.quaternion();
        Self {
            position: [p.position.x, p.position.y, p.position.z],
            quaternion: [q.w, q.i, q.j, q.k],
        }
    }
}

impl From<&PoseRecord> for BasePose {
    fn from(r: &PoseRecord) -> Self {
        let [w, x, y, z] = r.quaternion;
        BasePose {
            position: Vector3::from(r.position),
            orientation: UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseDelta(pub [f64; 6]);

impl PoseDelta {
    pub fn zero() -> Self {
        Self([0.0; 6])
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn rotation(&self) -> Vector3<f64> {
        Vector3::new(self.0[3], self.0[4], self.0[5])
    }

    pub fn from_parts(t: Vector3<f64>, w: Vector3<f64>) -> Self {
        Self([t.x, t.y, t.z, w.x, w.y, w.z])
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.map(|v| v * s))
    }
}

/// Tangent coordinates of `prev⁻¹ ∘ curr`.
pub fn pose_log(prev: &BasePose, curr: &BasePose) -> PoseDelta {
    let inv = prev.orientation.inverse();
    let t = inv * (curr.position - prev.position);
    let rel = inv * curr.orientation;
    PoseDelta::from_parts(t, rel.scaled_axis())
}

/// Inverse of [`pose_log`]; the output quaternion is renormalized.
pub fn pose_exp(prev: &BasePose, delta: &PoseDelta) -> BasePose {
    let rel = UnitQuaternion::from_scaled_axis(delta.rotation());
    let mut q = (prev.orientation * rel).into_inner();
    q.normalize_mut();
    BasePose {
        position: prev.position + prev.orientation * delta.translation(),
        orientation: UnitQuaternion::new_unchecked(q),
    }
}

/// Integrate a sequence of per-step deltas starting from `start`.
pub fn integrate(start: &BasePose, deltas: impl IntoIterator<Item = PoseDelta>) -> Vec<BasePose> {
    let mut pose = *start;
    deltas
        .into_iter()
        .map(|d| {
            pose = pose_exp(&pose, &d);
            pose
        })
        .collect()
}
