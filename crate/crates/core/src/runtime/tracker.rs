//! Kinematic stand-in for the whole-body controller: first-order joint
//! tracking with a rate limit, stance feet pinned to the terrain and the base
//! pose re-derived from the pinned feet.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::kinematics::{leg_fk, leg_ik, pose_log, BasePose, QuadrupedGeometry};
use crate::oracle::{distribute_weight, joint_torques, Episode, OracleConfig, RobotState};
use crate::terrain::HeightMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// First-order joint response time constant (s).
    pub time_constant: f64,
    /// Joint rate limit (rad/s).
    pub max_rate: f64,
    pub rate_hz: f64,
    /// Low-pass time constant of the reported body velocity (s).
    pub velocity_time_constant: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            time_constant: 0.002,
            max_rate: 20.0,
            rate_hz: 400.0,
            velocity_time_constant: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerOutput {
    pub state: RobotState,
    pub pose: BasePose,
    /// Target minus executed, per joint.
    pub error: [f64; 12],
    /// No stance feet: the base coasted at its last velocity.
    pub ballistic: bool,
    /// Largest world-frame motion of a pinned foot this tick (m).
    pub slip: f64,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    pub config: TrackerConfig,
    geometry: QuadrupedGeometry,
    q: [f64; 12],
    pose: BasePose,
    pins: [Option<Vector3<f64>>; 4],
    /// Body-frame planar velocity and yaw rate.
    velocity: [f64; 3],
    /// Filtered `velocity`, reported as the state's cdot.
    estimate: [f64; 3],
}

fn leg_q(q: &[f64; 12], leg: usize) -> [f64; 3] {
    [q[3 * leg], q[3 * leg + 1], q[3 * leg + 2]]
}

fn wrap_angle(a: f64) -> f64 {
    (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI
}

impl Tracker {
    /// Start at `q` and `pose`; legs in contact are pinned where they stand,
    /// snapped to the terrain.
    pub fn new(config: TrackerConfig, geometry: QuadrupedGeometry, q: [f64; 12], pose: BasePose, contacts: [bool; 4], map: &HeightMap) -> Self {
        let mut t = Self {
            config,
            geometry,
            q,
            pose,
            pins: [None; 4],
            velocity: [0.0; 3],
            estimate: [0.0; 3],
        };
        for leg in 0..4 {
            if contacts[leg] {
                t.pins[leg] = Some(t.pin_at(leg, &pose, map));
            }
        }
        t
    }

    pub fn q(&self) -> &[f64; 12] {
        &self.q
    }

    pub fn pose(&self) -> &BasePose {
        &self.pose
    }

    pub fn pins(&self) -> &[Option<Vector3<f64>>; 4] {
        &self.pins
    }

    pub fn set_velocity(&mut self, velocity: [f64; 3]) {
        self.velocity = velocity;
        self.estimate = velocity;
    }

    fn dt(&self) -> f64 {
        1.0 / self.config.rate_hz
    }

    fn pin_at(&self, leg: usize, pose: &BasePose, map: &HeightMap) -> Vector3<f64> {
        let w = pose.to_world(&leg_fk(&leg_q(&self.q, leg), &self.geometry.legs[leg]));
        Vector3::new(w.x, w.y, map.sample_clamped(w.x, w.y).height)
    }

    /// One tick toward `targets` with the commanded contacts and base pitch.
    pub fn step(&mut self, targets: &[f64; 12], contacts: [bool; 4], pitch: f64, map: &HeightMap) -> TrackerOutput {
        let dt = self.dt();
        let alpha = 1.0 - (-dt / self.config.time_constant).exp();
        let limit = self.config.max_rate * dt;
        for j in 0..12 {
            self.q[j] += (alpha * (targets[j] - self.q[j])).clamp(-limit, limit);
        }

        let prev = self.pose;
        for leg in 0..4 {
            match (contacts[leg], self.pins[leg]) {
                (true, None) => self.pins[leg] = Some(self.pin_at(leg, &prev, map)),
                (false, Some(_)) => self.pins[leg] = None,
                _ => {}
            }
        }

        let level = UnitQuaternion::from_euler_angles(0.0, pitch, 0.0);
        let pinned: Vec<(Vector3<f64>, Vector3<f64>)> = (0..4)
            .filter_map(|leg| {
                self.pins[leg].map(|p| (p, level * leg_fk(&leg_q(&self.q, leg), &self.geometry.legs[leg])))
            })
            .collect();

        let ballistic = pinned.is_empty();
        let pose = if ballistic {
            let yaw = prev.yaw();
            let (s, c) = yaw.sin_cos();
            let v = self.velocity;
            let position = prev.position + Vector3::new((c * v[0] - s * v[1]) * dt, (s * v[0] + c * v[1]) * dt, 0.0);
            BasePose::from_xyz_rpy(position.into(), 0.0, pitch, yaw + v[2] * dt)
        } else {
            let n = pinned.len() as f64;
            let yaw = if pinned.len() >= 2 {
                let cp = pinned.iter().fold(Vector3::zeros(), |a, (p, _)| a + p) / n;
                let cu = pinned.iter().fold(Vector3::zeros(), |a, (_, u)| a + u) / n;
                let (mut cross, mut dot) = (0.0, 0.0);
                for (p, u) in &pinned {
                    let (a, b) = (u - cu, p - cp);
                    cross += a.x * b.y - a.y * b.x;
                    dot += a.x * b.x + a.y * b.y;
                }
                if cross.abs() + dot.abs() > 1e-12 {
                    cross.atan2(dot)
                } else {
                    prev.yaw()
                }
            } else {
                prev.yaw()
            };
            let rz = UnitQuaternion::from_euler_angles(0.0, 0.0, yaw);
            let position = pinned.iter().fold(Vector3::zeros(), |a, (p, u)| a + (p - rz * u)) / n;
            BasePose::from_xyz_rpy(position.into(), 0.0, pitch, yaw)
        };

        // Stance legs follow their pins exactly.
        let mut slip: f64 = 0.0;
        for leg in 0..4 {
            if let Some(pin) = self.pins[leg] {
                let geom = &self.geometry.legs[leg];
                if let Ok(a) = leg_ik(&pose.to_base(&pin), geom) {
                    self.q[3 * leg..3 * leg + 3].copy_from_slice(&a);
                }
                let w = pose.to_world(&leg_fk(&leg_q(&self.q, leg), geom));
                slip = slip.max((w - pin).norm());
            }
        }

        if !ballistic {
            let d = pose.position - prev.position;
            let (s, c) = prev.yaw().sin_cos();
            self.velocity = [
                (c * d.x + s * d.y) / dt,
                (-s * d.x + c * d.y) / dt,
                wrap_angle(pose.yaw() - prev.yaw()) / dt,
            ];
        }
        let beta = if self.config.velocity_time_constant > 0.0 {
            1.0 - (-dt / self.config.velocity_time_constant).exp()
        } else {
            1.0
        };
        for k in 0..3 {
            self.estimate[k] += beta * (self.velocity[k] - self.estimate[k]);
        }
        self.pose = pose;

        let feet = self.geometry.feet(&self.q);
        let feet_world = feet.map(|f| pose.to_world(&f));
        let lambda = distribute_weight(self.geometry.mass, [pose.position.x, pose.position.y], &feet_world, contacts);
        let tau = joint_torques(&self.geometry, &pose, &self.q, &lambda);
        let mut ee = [0.0; 12];
        for leg in 0..4 {
            ee[3 * leg..3 * leg + 3].copy_from_slice(feet[leg].as_slice());
        }
        let mut error = [0.0; 12];
        for j in 0..12 {
            error[j] = targets[j] - self.q[j];
        }
        TrackerOutput {
            state: RobotState {
                q: self.q,
                ee,
                tau,
                lambda,
                cdot: self.estimate,
                roll: 0.0,
                pitch,
                dpose: pose_log(&prev, &pose).0,
            },
            pose,
            error,
            ballistic,
            slip,
        }
    }
}

/// Oracle episode executed through the tracker.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Replay {
    pub targets: Vec<[f64; 12]>,
    pub executed: Vec<[f64; 12]>,
    /// Executed feet, base frame.
    pub feet: Vec<[[f64; 3]; 4]>,
    pub contacts: Vec<[bool; 4]>,
    pub max_slip: f64,
}

/// Feed an episode's joint angles, contacts and base pitch to the tracker.
pub fn replay_episode(ep: &Episode, map: &HeightMap, oracle: &OracleConfig, config: TrackerConfig) -> Replay {
    let mut out = Replay::default();
    let Some(first) = ep.frames.first() else {
        return out;
    };
    let pose = ep.start_pose(oracle.geometry.nominal_height);
    let mut t = Tracker::new(config, oracle.geometry, first.state.q, pose, first.contacts, map);
    t.set_velocity(first.state.cdot);
    for f in &ep.frames[1..] {
        let o = t.step(&f.state.q, f.contacts, f.state.pitch, map);
        out.targets.push(f.state.q);
        out.executed.push(o.state.q);
        out.feet.push(std::array::from_fn(|leg| [o.state.ee[3 * leg], o.state.ee[3 * leg + 1], o.state.ee[3 * leg + 2]]));
        out.contacts.push(f.contacts);
        out.max_slip = out.max_slip.max(o.slip);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standing() -> ([f64; 12], BasePose, QuadrupedGeometry) {
        let geo = QuadrupedGeometry::default();
        let pose = BasePose::from_xyz_rpy([0.0, 0.0, geo.nominal_height], 0.0, 0.0, 0.0);
        let mut q = [0.0; 12];
        for leg in 0..4 {
            let h = geo.legs[leg].hip;
            let a = leg_ik(&Vector3::new(h[0], h[1], -geo.nominal_height), &geo.legs[leg]).unwrap();
            q[3 * leg..3 * leg + 3].copy_from_slice(&a);
        }
        (q, pose, geo)
    }

    #[test]
    fn holding_targets_changes_nothing() {
        let (q, pose, geo) = standing();
        let map = HeightMap::flat();
        let mut t = Tracker::new(TrackerConfig::default(), geo, q, pose, [true; 4], &map);
        let out = t.step(&q, [true; 4], 0.0, &map);
        assert!(out.error.iter().all(|e| e.abs() < 1e-9));
        assert!((out.pose.position - pose.position).norm() < 1e-9);
        assert!(out.slip < 1e-9 && !out.ballistic);
    }

    #[test]
    fn rate_limit_caps_the_step() {
        let (q, pose, geo) = standing();
        let map = HeightMap::flat();
        let cfg = TrackerConfig {
            max_rate: 10.0,
            ..TrackerConfig::default()
        };
        let mut t = Tracker::new(cfg, geo, q, pose, [false; 4], &map);
        let mut target = q;
        target[1] += 0.5;
        t.step(&target, [false; 4], 0.0, &map);
        assert!((t.q()[1] - q[1] - 0.025).abs() < 1e-12);
    }

    #[test]
    fn no_stance_feet_is_ballistic() {
        let (q, pose, geo) = standing();
        let map = HeightMap::flat();
        let mut t = Tracker::new(TrackerConfig::default(), geo, q, pose, [false; 4], &map);
        t.set_velocity([0.4, 0.0, 0.0]);
        let out = t.step(&q, [false; 4], 0.0, &map);
        assert!(out.ballistic);
        assert!((out.pose.position.x - 0.001).abs() < 1e-12);
    }

    #[test]
    fn stance_feet_push_the_base() {
        let (q, pose, geo) = standing();
        let map = HeightMap::flat();
        let mut t = Tracker::new(TrackerConfig::default(), geo.clone(), q, pose, [true; 4], &map);
        // every foot moves 1 cm backwards in the base frame
        let mut target = q;
        for leg in 0..4 {
            let f = leg_fk(&leg_q(&q, leg), &geo.legs[leg]) - Vector3::new(0.01, 0.0, 0.0);
            target[3 * leg..3 * leg + 3].copy_from_slice(&leg_ik(&f, &geo.legs[leg]).unwrap());
        }
        let mut out = t.step(&target, [true; 4], 0.0, &map);
        for _ in 0..20 {
            out = t.step(&target, [true; 4], 0.0, &map);
            assert!(out.slip < 1e-6);
        }
        assert!((out.pose.position.x - 0.01).abs() < 1e-6, "{}", out.pose.position.x);
    }
}
