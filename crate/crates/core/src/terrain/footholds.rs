use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::kinematics::{BasePose, QuadrupedGeometry, LF, LH, RF, RH};

/// Diagonal foothold height differences (m).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlPitch {
    /// h_LF − h_RH
    pub left: f64,
    /// h_RF − h_LH
    pub right: f64,
}

impl ControlPitch {
    pub fn as_array(&self) -> [f64; 2] {
        [self.left, self.right]
    }
}

pub fn control_pitch(heights: &[f64; 4]) -> ControlPitch {
    ControlPitch {
        left: heights[LF] - heights[RH],
        right: heights[RF] - heights[LH],
    }
}

/// Swing and stance durations of the current gait (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitTiming {
    pub swing: f64,
    pub stance: f64,
}

/// Time each leg has spent in its current contact state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContactTimers {
    pub contacts: [bool; 4],
    pub elapsed: [f64; 4],
    initialized: bool,
}

impl ContactTimers {
    pub fn update(&mut self, contacts: [bool; 4], dt: f64) {
        if !self.initialized {
            self.contacts = contacts;
            self.elapsed = [0.0; 4];
            self.initialized = true;
            return;
        }
        for i in 0..4 {
            if contacts[i] != self.contacts[i] {
                self.contacts[i] = contacts[i];
                self.elapsed[i] = 0.0;
            } else {
                self.elapsed[i] += dt;
            }
        }
    }

    /// Time until leg `i` next touches down.
    pub fn time_to_touchdown(&self, i: usize, timing: &GaitTiming) -> f64 {
        if self.contacts[i] {
            (timing.stance - self.elapsed[i]).max(0.0) + timing.swing
        } else {
            (timing.swing - self.elapsed[i]).max(0.0)
        }
    }
}

/// World-frame planar velocity for a body-frame command `[v_x, v_y, ω]`.
pub fn command_velocity_world(pose: &BasePose, command: &[f64; 3]) -> [f64; 2] {
    let (s, c) = pose.yaw().sin_cos();
    [c * command[0] - s * command[1], s * command[0] + c * command[1]]
}

/// Next touchdown of one foot: hip ground projection + v·t_td + v·T_st/2.
pub fn predict_foothold(hip_xy: [f64; 2], velocity: [f64; 2], time_to_touchdown: f64, stance: f64) -> [f64; 2] {
    let horizon = time_to_touchdown + 0.5 * stance;
    [hip_xy[0] + velocity[0] * horizon, hip_xy[1] + velocity[1] * horizon]
}

pub fn predict_footholds(
    geometry: &QuadrupedGeometry,
    pose: &BasePose,
    command: &[f64; 3],
    timers: &ContactTimers,
    timing: &GaitTiming,
) -> [[f64; 2]; 4] {
    let v = command_velocity_world(pose, command);
    std::array::from_fn(|i| {
        let hip = pose.to_world(&Vector3::from(geometry.legs[i].hip));
        predict_foothold([hip.x, hip.y], v, timers.time_to_touchdown(i, timing), timing.stance)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_ground_pitch_is_zero() {
        assert_eq!(control_pitch(&[0.0; 4]), ControlPitch::default());
    }

    #[test]
    fn single_and_paired_steps() {
        let p = control_pitch(&[0.125, 0.0, 0.0, 0.0]);
        assert_eq!(p.as_array(), [0.125, 0.0]);
        let p = control_pitch(&[0.125, 0.125, 0.0, 0.0]);
        assert_eq!(p.as_array(), [0.125, 0.125]);
    }

    #[test]
    fn swapping_diagonals_flips_sign() {
        let h = [0.03, -0.02, 0.11, 0.07];
        let p = control_pitch(&h);
        let q = control_pitch(&[h[RH], h[LH], h[RF], h[LF]]);
        assert_eq!(q.left, -p.left);
        assert_eq!(q.right, -p.right);
    }

    #[test]
    fn linear_extrapolation() {
        let f = predict_foothold([1.0, 0.2], [0.25, 0.0], 0.4, 0.0);
        assert!((f[0] - 1.1).abs() < 1e-15 && f[1] == 0.2);
    }

    #[test]
    fn zero_command_lands_under_hips() {
        let geo = QuadrupedGeometry::default();
        let pose = BasePose::from_xyz_rpy([2.0, 1.0, 0.48], 0.0, 0.0, 0.3);
        let mut timers = ContactTimers::default();
        timers.update([true, false, false, true], 0.0025);
        let timing = GaitTiming { swing: 0.36, stance: 0.44 };
        let f = predict_footholds(&geo, &pose, &[0.0; 3], &timers, &timing);
        for i in 0..4 {
            let hip = pose.to_world(&Vector3::from(geo.legs[i].hip));
            assert!((f[i][0] - hip.x).abs() < 1e-12 && (f[i][1] - hip.y).abs() < 1e-12);
        }
    }

    #[test]
    fn timers_reset_on_transition() {
        let mut t = ContactTimers::default();
        let timing = GaitTiming { swing: 0.36, stance: 0.44 };
        t.update([true, false, true, false], 0.01);
        for _ in 0..10 {
            t.update([true, false, true, false], 0.01);
        }
        assert!((t.elapsed[0] - 0.1).abs() < 1e-12);
        assert!((t.time_to_touchdown(1, &timing) - 0.26).abs() < 1e-12);
        assert!((t.time_to_touchdown(0, &timing) - 0.70).abs() < 1e-12);
        t.update([false, false, true, false], 0.01);
        assert_eq!(t.elapsed[0], 0.0);
        assert!((t.time_to_touchdown(0, &timing) - 0.36).abs() < 1e-12);
    }
}
