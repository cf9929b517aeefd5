//! Three-joint point-foot leg: hip abduction (about x), hip flexion and knee
//! (about y). The zero configuration points the leg straight down. Right legs
//! are mirror images of left legs under y-negation.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::KinematicsError;

/// Leg order used throughout: left-front, right-front, left-hind, right-hind.
pub const LEG_NAMES: [&str; 4] = ["LF", "RF", "LH", "RH"];
pub const LF: usize = 0;
pub const RF: usize = 1;
pub const LH: usize = 2;
pub const RH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegGeometry {
    /// Hip position in the base frame (m).
    pub hip: [f64; 3],
    pub upper: f64,
    pub lower: f64,
    /// Right-side legs mirror the left-side chain across the sagittal plane.
    pub mirrored: bool,
}

impl LegGeometry {
    pub fn new(hip: [f64; 3], upper: f64, lower: f64, mirrored: bool) -> Result<Self, KinematicsError> {
        if !(upper > 0.0 && lower > 0.0) {
            return Err(KinematicsError::InvalidGeometry { upper, lower });
        }
        Ok(Self {
            hip,
            upper,
            lower,
            mirrored,
        })
    }

    pub fn hip_vec(&self) -> Vector3<f64> {
        Vector3::from(self.hip)
    }

    fn side(&self) -> f64 {
        if self.mirrored {
            -1.0
        } else {
            1.0
        }
    }
}

/// Geometry of the whole robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrupedGeometry {
    pub legs: [LegGeometry; 4],
    /// Nominal standing height of the base above the terrain (m).
    pub nominal_height: f64,
    /// Body mass used by the quasi-static force model (kg).
    pub mass: f64,
}

impl Default for QuadrupedGeometry {
    fn default() -> Self {
        Self::symmetric(0.3, 0.2, 0.3, 0.3)
    }
}

impl QuadrupedGeometry {
    pub fn symmetric(hip_x: f64, hip_y: f64, upper: f64, lower: f64) -> Self {
        let leg = |x: f64, y: f64, mirrored| LegGeometry {
            hip: [x, y, 0.0],
            upper,
            lower,
            mirrored,
        };
        Self {
            legs: [
                leg(hip_x, hip_y, false),
                leg(hip_x, -hip_y, true),
                leg(-hip_x, hip_y, false),
                leg(-hip_x, -hip_y, true),
            ],
            nominal_height: 0.48,
            mass: 50.0,
        }
    }

    /// Foot positions (base frame) for the 12 joint angles.
    pub fn feet(&self, q: &[f64; 12]) -> [Vector3<f64>; 4] {
        std::array::from_fn(|i| leg_fk(&[q[3 * i], q[3 * i + 1], q[3 * i + 2]], &self.legs[i]))
    }
}

/// Foot position in the base frame.
pub fn leg_fk(angles: &[f64; 3], geom: &LegGeometry) -> Vector3<f64> {
    let [haa, hfe, kfe] = *angles;
    // Planar chain in the leg's sagittal plane; links measured from -z.
    let px = -geom.upper * hfe.sin() - geom.lower * (hfe + kfe).sin();
    let pz = -geom.upper * hfe.cos() - geom.lower * (hfe + kfe).cos();
    // Abduction rotates the plane about x.
    let (s, c) = haa.sin_cos();
    let local = Vector3::new(px, -s * pz, c * pz);
    let side = geom.side();
    geom.hip_vec() + Vector3::new(local.x, side * local.y, local.z)
}

/// Knee-backward inverse kinematics (knee angle ≤ 0).
pub fn leg_ik(foot: &Vector3<f64>, geom: &LegGeometry) -> Result<[f64; 3], KinematicsError> {
    let mut d = foot - geom.hip_vec();
    d.y *= geom.side();
    let r = d.norm();
    let max = geom.upper + geom.lower;
    let min = (geom.upper - geom.lower).abs();
    if r > max {
        return Err(KinematicsError::Unreachable { deficit: r - max });
    }
    if r < min {
        return Err(KinematicsError::Unreachable { deficit: min - r });
    }
    let haa = if d.y == 0.0 && d.z == 0.0 { 0.0 } else { d.y.atan2(-d.z) };
    // Sagittal-plane target (x, -z) after undoing abduction.
    let vz = -(d.y * d.y + d.z * d.z).sqrt();
    let (tx, tz) = (-d.x, -vz);
    let (l1, l2) = (geom.upper, geom.lower);
    let cos_k = ((r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let kfe = -cos_k.acos();
    let hfe = tx.atan2(tz) - (l2 * kfe.sin()).atan2(l1 + l2 * kfe.cos());
    Ok([haa, hfe, kfe])
}

/// Jacobian ∂foot/∂angles by central differences.
pub fn leg_jacobian(angles: &[f64; 3], geom: &LegGeometry) -> nalgebra::Matrix3<f64> {
    let h = 1e-6;
    let mut j = nalgebra::Matrix3::zeros();
    for k in 0..3 {
        let mut p = *angles;
        p[k] += h;
        let fp = leg_fk(&p, geom);
        p[k] -= 2.0 * h;
        let fm = leg_fk(&p, geom);
        j.set_column(k, &((fp - fm) / (2.0 * h)));
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn left() -> LegGeometry {
        LegGeometry::new([0.3, 0.2, 0.0], 0.3, 0.3, false).unwrap()
    }

    #[test]
    fn zero_configuration_points_down() {
        let g = left();
        let p = leg_fk(&[0.0, 0.0, 0.0], &g);
        assert!((p - Vector3::new(0.3, 0.2, -0.6)).norm() < 1e-15);
    }

    #[test]
    fn knee_right_angle() {
        let g = LegGeometry::new([0.0; 3], 0.3, 0.3, false).unwrap();
        let p = leg_fk(&[0.0, 0.0, FRAC_PI_2], &g);
        // z = -0.3(1 + cos π/2); the shank points 0.3 m backward.
        assert!((p.z + 0.3).abs() < 1e-12);
        assert!((p.x + 0.3).abs() < 1e-12);
        assert!(p.y.abs() < 1e-12);
    }

    #[test]
    fn straight_down_ik_is_zero() {
        let g = left();
        let a = leg_ik(&Vector3::new(0.3, 0.2, -0.6), &g).unwrap();
        for v in a {
            assert!(v.abs() < 1e-7, "{a:?}");
        }
    }

    #[test]
    fn unreachable_reports_deficit() {
        let g = left();
        match leg_ik(&Vector3::new(0.3, 0.2, -0.61), &g) {
            Err(KinematicsError::Unreachable { deficit }) => assert!((deficit - 0.01).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(LegGeometry::new([0.0; 3], 0.0, 0.3, false).is_err());
    }

    #[test]
    fn reachable_grid_roundtrip() {
        let geo = QuadrupedGeometry::default();
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for leg in &geo.legs {
            for i in 0..10 {
                for j in 0..5 {
                    for k in 0..5 {
                        let offset = Vector3::new(-0.25 + 0.05 * i as f64, -0.12 + 0.06 * j as f64, -0.28 - 0.05 * k as f64);
                        let target = leg.hip_vec() + offset;
                        let a = leg_ik(&target, leg).unwrap();
                        assert!(a[2] <= 0.0);
                        worst = worst.max((leg_fk(&a, leg) - target).norm());
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 1000);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn jacobian_matches_motion() {
        let g = left();
        let a = [0.1, 0.4, -0.9];
        let j = leg_jacobian(&a, &g);
        let da = Vector3::new(1e-4, -2e-4, 1.5e-4);
        let moved = leg_fk(&[a[0] + da.x, a[1] + da.y, a[2] + da.z], &g);
        assert!((moved - leg_fk(&a, &g) - j * da).norm() < 1e-7);
    }

    proptest! {
        #[test]
        fn fk_ik_roundtrip(haa in -0.4f64..0.4, hfe in -0.8f64..0.8, kfe in -2.5f64..-0.05) {
            let planar_z = -0.3 * hfe.cos() - 0.3 * (hfe + kfe).cos();
            prop_assume!(planar_z < -0.05);
            for mirrored in [false, true] {
                let g = LegGeometry::new([0.3, if mirrored { -0.2 } else { 0.2 }, 0.0], 0.3, 0.3, mirrored).unwrap();
                let p = leg_fk(&[haa, hfe, kfe], &g);
                let a = leg_ik(&p, &g).unwrap();
                prop_assert!((leg_fk(&a, &g) - p).norm() < 1e-9);
                prop_assert!((a[0] - haa).abs() < 1e-7 && (a[1] - hfe).abs() < 1e-7 && (a[2] - kfe).abs() < 1e-7);
            }
        }

        #[test]
        fn mirrored_legs_reflect(haa in -0.5f64..0.5, hfe in -1.0f64..1.0, kfe in -2.0f64..0.0) {
            let l = LegGeometry::new([0.3, 0.2, 0.0], 0.3, 0.3, false).unwrap();
            let r = LegGeometry::new([0.3, -0.2, 0.0], 0.3, 0.3, true).unwrap();
            let pl = leg_fk(&[haa, hfe, kfe], &l);
            let pr = leg_fk(&[haa, hfe, kfe], &r);
            prop_assert!((pl.x - pr.x).abs() < 1e-15 && (pl.y + pr.y).abs() < 1e-15 && (pl.z - pr.z).abs() < 1e-15);
        }
    }
}
