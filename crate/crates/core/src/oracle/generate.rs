//! Scripted expert: kinematically consistent episodes from a contact
//! schedule, Raibert-style touchdowns and cycloidal swings.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::episode::SCHEMA_VERSION;
use super::forces::{distribute_weight, joint_torques};
use super::{contact_schedule, level_blend, swing_profile, Episode, EpisodeHeader, Frame, GaitParams, OracleError, RobotState};
use crate::kinematics::{leg_fk, leg_ik, pose_log, BasePose, QuadrupedGeometry};
use crate::terrain::{HeightMap, LtiFilter, TerrainConfig, TerrainTracker};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub geometry: QuadrupedGeometry,
    pub terrain: TerrainConfig,
    pub rate_hz: f64,
    pub swing_height: f64,
    /// Range of the per-episode stride amplitude on flat ground.
    pub amplitude_range: [f64; 2],
    /// Extra stride amplitude per metre of mean filtered control pitch.
    pub climb_gain: f64,
    pub climb_cap: f64,
    /// Share of the climb boost applied to swing height.
    pub climb_height_share: f64,
    pub velocity_time_constant: f64,
    /// Lever arm converting control pitch into a base pitch angle (m).
    pub stance_length: f64,
    pub max_speed: f64,
    pub episode_seconds: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            geometry: QuadrupedGeometry::default(),
            terrain: TerrainConfig::default(),
            rate_hz: 400.0,
            swing_height: super::NOMINAL_SWING_HEIGHT,
            amplitude_range: [0.4, 1.3],
            climb_gain: 9.0,
            climb_cap: 1.5,
            climb_height_share: 1.0,
            velocity_time_constant: 0.25,
            stance_length: 0.6,
            max_speed: 0.5,
            episode_seconds: 20.0,
        }
    }
}

impl OracleConfig {
    /// Stride amplitude multiplier for the current filtered control pitch.
    pub fn climb_boost(&self, filtered: [f64; 2]) -> f64 {
        let mean = 0.5 * (filtered[0] + filtered[1]);
        1.0 + (self.climb_gain * mean.max(0.0)).min(self.climb_cap)
    }

    /// Base pitch (nose-up negative) for a filtered control pitch.
    pub fn base_pitch(&self, filtered: [f64; 2]) -> f64 {
        base_pitch_from_control(filtered, self.stance_length)
    }
}

pub fn base_pitch_from_control(filtered: [f64; 2], stance_length: f64) -> f64 {
    let mean = 0.5 * (filtered[0] + filtered[1]);
    -(mean / stance_length).clamp(-1.0, 1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandSegment {
    pub start: f64,
    pub command: [f64; 3],
}

/// Piecewise-constant operator command over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandSchedule {
    pub segments: Vec<CommandSegment>,
}

impl CommandSchedule {
    pub fn constant(command: [f64; 3]) -> Self {
        Self {
            segments: vec![CommandSegment { start: 0.0, command }],
        }
    }

    pub fn at(&self, t: f64) -> [f64; 3] {
        self.segments
            .iter()
            .take_while(|s| s.start <= t + 1e-12)
            .last()
            .or(self.segments.first())
            .map(|s| s.command)
            .unwrap_or([0.0; 3])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpec {
    pub gait: GaitParams,
    pub terrain_id: String,
    pub commands: CommandSchedule,
    pub duration: f64,
    pub seed: u64,
    pub amplitude: f64,
    /// Stride fraction at frame 0; drawn from `seed` when `None`.
    pub phase0: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct LegState {
    stance: bool,
    foot: Vector3<f64>,
    liftoff: Vector3<f64>,
    touchdown: Vector3<f64>,
    height: f64,
}

fn sample(map: &HeightMap, xy: [f64; 2], frame: usize) -> Result<f64, OracleError> {
    let s = map.sample_clamped(xy[0], xy[1]);
    if s.clamped {
        return Err(OracleError::OffMap { frame, x: xy[0], y: xy[1] });
    }
    Ok(s.height)
}

fn rotate(yaw: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = yaw.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn hip_xy(geometry: &QuadrupedGeometry, pose: &BasePose, leg: usize) -> [f64; 2] {
    let h = pose.to_world(&Vector3::from(geometry.legs[leg].hip));
    [h.x, h.y]
}

fn swing_foot(leg: &LegState, s: f64, length_dir: [f64; 2]) -> Vector3<f64> {
    let (fwd, up) = swing_profile(s, leg.height, 1.0);
    let rising = leg.touchdown.z >= leg.liftoff.z;
    let z = leg.liftoff.z + (leg.touchdown.z - leg.liftoff.z) * level_blend(s, rising) + up;
    Vector3::new(leg.liftoff.x + length_dir[0] * fwd, leg.liftoff.y + length_dir[1] * fwd, z)
}

pub fn generate_episode(spec: &EpisodeSpec, map: &HeightMap, cfg: &OracleConfig) -> Result<Episode, OracleError> {
    let gait = &spec.gait;
    let geo = &cfg.geometry;
    let dt = 1.0 / cfg.rate_hz;
    let frames_n = (spec.duration * cfg.rate_hz).round() as usize;
    let t_sw = gait.swing_duration();
    let t_st = gait.stance_duration();
    let half_reach = 0.5 * gait.swing_length_scale;
    let timing = gait.timing();
    for seg in &spec.commands.segments {
        let c = seg.command;
        if (c[0] * c[0] + c[1] * c[1]).sqrt() > cfg.max_speed || !c.iter().all(|v| v.is_finite()) {
            return Err(OracleError::CommandLimit { command: c, limit: cfg.max_speed });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phase0 = spec.phase0.unwrap_or_else(|| rng.gen::<f64>());
    let mut tracker = TerrainTracker::new(cfg.terrain, *geo)?;
    tracker.warm_start_at(map, [0.0, 0.0], 0.0);
    let mut height_filter = LtiFilter::new(8.0, 0.9, dt)?;

    let cmd0 = spec.commands.at(0.0);
    let mut boost = cfg.climb_boost(tracker.filtered());
    let mut vel = [spec.amplitude * boost * cmd0[0], spec.amplitude * boost * cmd0[1]];
    let mut yaw_rate = cmd0[2];
    let mut pos = [0.0, 0.0];
    let mut yaw = 0.0;
    let mut pitch = cfg.base_pitch(tracker.filtered());
    let level = BasePose::from_xyz_rpy([0.0, 0.0, geo.nominal_height], 0.0, pitch, 0.0);

    // Steady-state feet for the initial phase and velocity.
    let mut legs: [LegState; 4] = [LegState {
        stance: true,
        foot: Vector3::zeros(),
        liftoff: Vector3::zeros(),
        touchdown: Vector3::zeros(),
        height: 0.0,
    }; 4];
    let v_w = rotate(yaw, vel);
    for (i, leg) in legs.iter_mut().enumerate() {
        let hip = hip_xy(geo, &level, i);
        let at = |dt_off: f64| [hip[0] + v_w[0] * dt_off, hip[1] + v_w[1] * dt_off];
        leg.height = cfg.swing_height * spec.amplitude * (1.0 + cfg.climb_height_share * (boost - 1.0));
        match gait.swing_progress(i, phase0) {
            None => {
                let u = gait.leg_cycle(i, phase0) / gait.duty;
                let xy = at(half_reach - u * t_st);
                leg.foot = Vector3::new(xy[0], xy[1], sample(map, xy, 0)?);
                leg.touchdown = leg.foot;
            }
            Some(s) => {
                leg.stance = false;
                let lo = at(-s * t_sw + half_reach - t_st);
                let td = at((1.0 - s) * t_sw + half_reach);
                leg.liftoff = Vector3::new(lo[0], lo[1], sample(map, lo, 0)?);
                leg.touchdown = Vector3::new(td[0], td[1], sample(map, td, 0)?);
                let d = [td[0] - lo[0], td[1] - lo[1]];
                leg.foot = swing_foot(leg, s, d);
            }
        }
    }
    let support = |legs: &[LegState; 4]| legs.iter().map(|l| l.touchdown.z).sum::<f64>() / 4.0;
    height_filter.reset(geo.nominal_height + support(&legs));

    let mut frames = Vec::with_capacity(frames_n);
    let mut prev_pose = None;
    let alpha = 1.0 - (-dt / cfg.velocity_time_constant).exp();

    for k in 0..frames_n {
        let t = k as f64 * dt;
        let cmd = spec.commands.at(t);
        let phase = phase0 + t / gait.stride_period;
        let contacts = contact_schedule(gait, phase);

        if k > 0 {
            boost = cfg.climb_boost(tracker.filtered());
            let target = [spec.amplitude * boost * cmd[0], spec.amplitude * boost * cmd[1]];
            vel[0] += alpha * (target[0] - vel[0]);
            vel[1] += alpha * (target[1] - vel[1]);
            yaw_rate += alpha * (cmd[2] - yaw_rate);
            let vw = rotate(yaw, vel);
            pos[0] += vw[0] * dt;
            pos[1] += vw[1] * dt;
            yaw += yaw_rate * dt;
            pitch = cfg.base_pitch(tracker.filtered());
        }
        let provisional = BasePose::from_xyz_rpy([pos[0], pos[1], geo.nominal_height], 0.0, pitch, yaw);
        let v_w = rotate(yaw, vel);

        if k > 0 {
            for (i, leg) in legs.iter_mut().enumerate() {
                match (leg.stance, contacts[i]) {
                    (true, false) => {
                        let s = gait.swing_progress(i, phase).unwrap_or(0.0);
                        let hip = hip_xy(geo, &provisional, i);
                        let reach = (1.0 - s) * t_sw + half_reach;
                        let td = [hip[0] + v_w[0] * reach, hip[1] + v_w[1] * reach];
                        leg.stance = false;
                        leg.liftoff = leg.foot;
                        leg.touchdown = Vector3::new(td[0], td[1], sample(map, td, k)?);
                        leg.height = cfg.swing_height * spec.amplitude * (1.0 + cfg.climb_height_share * (boost - 1.0));
                        let d = [td[0] - leg.liftoff.x, td[1] - leg.liftoff.y];
                        leg.foot = swing_foot(leg, s, d);
                    }
                    (false, false) => {
                        let s = gait.swing_progress(i, phase).unwrap_or(1.0);
                        let d = [leg.touchdown.x - leg.liftoff.x, leg.touchdown.y - leg.liftoff.y];
                        leg.foot = swing_foot(leg, s, d);
                    }
                    (false, true) => {
                        leg.stance = true;
                        leg.foot = leg.touchdown;
                    }
                    (true, true) => {}
                }
            }
        }

        let z = height_filter.step(geo.nominal_height + support(&legs))?;
        let pose = BasePose::from_xyz_rpy([pos[0], pos[1], z], 0.0, pitch, yaw);

        let mut q = [0.0; 12];
        let mut ee = [0.0; 12];
        let mut feet_world = [Vector3::zeros(); 4];
        for (i, leg) in legs.iter().enumerate() {
            let local = pose.to_base(&leg.foot);
            let angles = leg_ik(&local, &geo.legs[i]).map_err(|e| OracleError::Unreachable {
                frame: k,
                leg: i,
                source: e,
            })?;
            q[3 * i..3 * i + 3].copy_from_slice(&angles);
            let p = leg_fk(&angles, &geo.legs[i]);
            ee[3 * i..3 * i + 3].copy_from_slice(p.as_slice());
            feet_world[i] = leg.foot;
        }
        let lambda = distribute_weight(geo.mass, pos, &feet_world, contacts);
        let tau = joint_torques(geo, &pose, &q, &lambda);

        let before = prev_pose.unwrap_or_else(|| {
            let back = rotate(yaw, vel);
            BasePose::new(pose.position - Vector3::new(back[0] * dt, back[1] * dt, 0.0), pose.orientation)
        });
        let dpose = pose_log(&before, &pose);
        prev_pose = Some(pose);

        let tick = tracker.step(map, &pose, &cmd, contacts, &timing)?;
        frames.push(Frame {
            state: RobotState {
                q,
                ee,
                tau,
                lambda,
                cdot: [vel[0], vel[1], yaw_rate],
                roll: 0.0,
                pitch,
                dpose: dpose.0,
            },
            contacts,
            foothold_h: tick.heights,
            action: cmd,
        });
    }

    Ok(Episode {
        header: EpisodeHeader {
            schema_version: SCHEMA_VERSION,
            gait_label: gait.kind.label(),
            frame_rate: cfg.rate_hz,
            terrain: spec.terrain_id.clone(),
            length: frames.len(),
            gait: gait.kind,
            phase0,
            stride_period: gait.stride_period,
            duty: gait.duty,
            offsets: gait.offsets,
            amplitude: spec.amplitude,
            seed: spec.seed,
        },
        frames,
    })
}
