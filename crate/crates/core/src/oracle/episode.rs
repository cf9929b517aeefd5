use serde::{Deserialize, Serialize};

use super::{GaitKind, GaitParams};
use crate::kinematics::{integrate, BasePose, PoseDelta};

/// Length of the flattened robot state vector.
pub const STATE_DIM: usize = 51;

/// Offsets of each block inside the flattened state.
pub mod layout {
    pub const Q: usize = 0;
    pub const EE: usize = 12;
    pub const TAU: usize = 24;
    pub const LAMBDA: usize = 36;
    pub const CDOT: usize = 40;
    pub const ROLL: usize = 43;
    pub const PITCH: usize = 44;
    pub const DPOSE: usize = 45;
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub q: [f64; 12],
    pub ee: [f64; 12],
    pub tau: [f64; 12],
    pub lambda: [f64; 4],
    /// Base-frame forward and lateral velocity, yaw rate.
    pub cdot: [f64; 3],
    pub roll: f64,
    pub pitch: f64,
    pub dpose: [f64; 6],
}

impl RobotState {
    pub fn to_vector(&self) -> [f64; STATE_DIM] {
        let mut v = [0.0; STATE_DIM];
        self.write_into(&mut v);
        v
    }

    pub fn write_into(&self, v: &mut [f64]) {
        v[layout::Q..layout::Q + 12].copy_from_slice(&self.q);
        v[layout::EE..layout::EE + 12].copy_from_slice(&self.ee);
        v[layout::TAU..layout::TAU + 12].copy_from_slice(&self.tau);
        v[layout::LAMBDA..layout::LAMBDA + 4].copy_from_slice(&self.lambda);
        v[layout::CDOT..layout::CDOT + 3].copy_from_slice(&self.cdot);
        v[layout::ROLL] = self.roll;
        v[layout::PITCH] = self.pitch;
        v[layout::DPOSE..layout::DPOSE + 6].copy_from_slice(&self.dpose);
    }

    pub fn from_vector(v: &[f64]) -> Self {
        let take = |o: usize, n: usize| -> Vec<f64> { v[o..o + n].to_vec() };
        let mut s = RobotState::default();
        s.q.copy_from_slice(&take(layout::Q, 12));
        s.ee.copy_from_slice(&take(layout::EE, 12));
        s.tau.copy_from_slice(&take(layout::TAU, 12));
        s.lambda.copy_from_slice(&take(layout::LAMBDA, 4));
        s.cdot.copy_from_slice(&take(layout::CDOT, 3));
        s.roll = v[layout::ROLL];
        s.pitch = v[layout::PITCH];
        s.dpose.copy_from_slice(&take(layout::DPOSE, 6));
        s
    }

    pub fn pose_delta(&self) -> PoseDelta {
        PoseDelta(self.dpose)
    }

    pub fn leg_q(&self, leg: usize) -> [f64; 3] {
        [self.q[3 * leg], self.q[3 * leg + 1], self.q[3 * leg + 2]]
    }

    pub fn foot(&self, leg: usize) -> [f64; 3] {
        [self.ee[3 * leg], self.ee[3 * leg + 1], self.ee[3 * leg + 2]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Frame {
    pub state: RobotState,
    pub contacts: [bool; 4],
    pub foothold_h: [f64; 4],
    /// Operator command `[v_x, v_y, yaw rate]`.
    pub action: [f64; 3],
}

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub schema_version: u32,
    pub gait_label: f64,
    pub frame_rate: f64,
    pub terrain: String,
    #[serde(rename = "D")]
    pub length: usize,
    pub gait: GaitKind,
    /// Gait phase (stride fraction) at frame 0.
    pub phase0: f64,
    pub stride_period: f64,
    pub duty: f64,
    pub offsets: [f64; 4],
    /// Stride amplitude multiplier used by the generator.
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub header: EpisodeHeader,
    pub frames: Vec<Frame>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn gait_label(&self) -> f64 {
        self.header.gait_label
    }

    pub fn gait(&self) -> GaitParams {
        let p = GaitParams::preset(self.header.gait);
        GaitParams {
            offsets: self.header.offsets,
            duty: self.header.duty,
            stride_period: self.header.stride_period,
            swing_length_scale: self.header.duty * self.header.stride_period,
            ..p
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.header.frame_rate
    }

    /// Gait phase (stride fraction, unwrapped) at frame `k`.
    pub fn phase(&self, k: usize) -> f64 {
        self.header.phase0 + k as f64 * self.dt() / self.header.stride_period
    }

    /// World pose at frame 0: origin, zero yaw, recorded roll and pitch.
    pub fn start_pose(&self, base_height: f64) -> BasePose {
        let s = &self.frames[0].state;
        BasePose::from_xyz_rpy([0.0, 0.0, base_height], s.roll, s.pitch, 0.0)
    }

    /// World base poses for every frame, integrating the stored pose deltas.
    pub fn poses(&self, base_height: f64) -> Vec<BasePose> {
        if self.frames.is_empty() {
            return Vec::new();
        }
        let start = self.start_pose(base_height);
        let mut out = Vec::with_capacity(self.frames.len());
        out.push(start);
        out.extend(integrate(&start, self.frames[1..].iter().map(|f| f.state.pose_delta())));
        out
    }
}
