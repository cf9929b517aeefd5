//! Quadruped geometry: leg forward/inverse kinematics and tangent-space
//! base-pose composition.

mod leg;
mod pose;

pub use leg::{leg_fk, leg_ik, leg_jacobian, LegGeometry, QuadrupedGeometry, LEG_NAMES, LF, LH, RF, RH};
pub use pose::{integrate, pose_exp, pose_log, BasePose, PoseDelta, PoseRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("target unreachable: outside the leg annulus by {deficit:.4} m")]
    Unreachable { deficit: f64 },
    #[error("invalid link lengths upper={upper} lower={lower}")]
    InvalidGeometry { upper: f64, lower: f64 },
}
