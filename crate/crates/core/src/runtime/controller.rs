//! The per-tick deployment sequence.

use std::collections::VecDeque;
use std::f64::consts::TAU;
use std::time::Instant;

use super::command::{gait_timing, GaitCommand};
use super::tracker::{Tracker, TrackerOutput};
use super::{RuntimeConfig, RuntimeError};
use crate::kinematics::BasePose;
use crate::models::{from_polar, latent_override, write_encoder_frames, ModelBundle, ModelConfig, Normalizer, ACTION_DIM, CONTACT_DIM, TERRAIN_CHANNELS};
use crate::nn::FrozenNet;
use crate::oracle::{self, base_pitch_from_control, generate_episode, EpisodeSpec, GaitKind, GaitParams, OracleConfig, RobotState, STATE_DIM};
use crate::terrain::{HeightMap, TerrainTracker};

pub const STAGES: [&str; 9] = [
    "phase",
    "terrain",
    "terrain_encode",
    "robot_encode",
    "planner",
    "override",
    "decode",
    "contacts",
    "pitch",
];

/// Single-precision inference copies of a trained bundle.
#[derive(Debug, Clone)]
pub struct RuntimeModels {
    pub config: ModelConfig,
    pub dims: [usize; 2],
    pub bins: Vec<f64>,
    pub oracle: OracleConfig,
    encoder: FrozenNet<f32>,
    decoder: FrozenNet<f32>,
    predictor: FrozenNet<f32>,
    terrain: FrozenNet<f32>,
    planner: FrozenNet<f32>,
    input_norm: Normalizer,
    target_norm: Normalizer,
    action_norm: Normalizer,
    terrain_norm: Normalizer,
}

impl RuntimeModels {
    pub fn from_bundle(bundle: &ModelBundle) -> Result<Self, RuntimeError> {
        bundle.vae.check_shapes()?;
        let planner = bundle.planner()?;
        Ok(Self {
            config: *bundle.config(),
            dims: bundle.planning_dims()?,
            bins: planner.bins.clone(),
            oracle: bundle.oracle.clone(),
            encoder: FrozenNet::from_net(&bundle.vae.encoder),
            decoder: FrozenNet::from_net(&bundle.vae.decoder),
            predictor: FrozenNet::from_net(&bundle.vae.predictor),
            terrain: FrozenNet::from_net(&bundle.terrain.encoder),
            planner: FrozenNet::from_net(&planner.net),
            input_norm: bundle.vae.input_norm.clone(),
            target_norm: bundle.vae.target_norm.clone(),
            action_norm: bundle.vae.action_norm.clone(),
            terrain_norm: bundle.terrain.norm.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageLatencies {
    pub stages_us: [u32; 9],
    pub total_us: u32,
    pub overrun: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub tick: u64,
    pub phi: f64,
    pub dphi: f64,
    pub radius: f64,
    /// Overridden planning-dim values.
    pub z_plan: [f64; 2],
    pub g: f64,
    /// Applied (limited, smoothed) velocity action.
    pub action: [f64; 3],
    pub targets: [f64; 12],
    pub contact_probs: [f64; 4],
    /// `M` decoded frames, row-major, physical units.
    pub preview: Vec<f64>,
    /// Commanded base pitch (rad).
    pub pitch: f64,
    pub filtered: [f64; 2],
    pub latency: StageLatencies,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub tick: TickOutput,
    pub contacts: [bool; 4],
    pub tracked: TrackerOutput,
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    /// Executed states and base poses at the control rate, oldest first.
    pub history: VecDeque<(RobotState, BasePose)>,
    pub capacity: usize,
    pub phi: f64,
    pub command: GaitCommand,
    pub action: [f64; 3],
    pub terrain: TerrainTracker,
    pub contacts: [bool; 4],
    pub z_r: Vec<f64>,
    pub z_g: Vec<f64>,
    pub tick: u64,
    pub overruns: u64,
    pub max_latency_us: u32,
}

impl ControllerState {
    fn push(&mut self, state: RobotState, pose: BasePose) {
        if self.history.len() == self.capacity {
            self.history.pop_front();
        }
        self.history.push_back((state, pose));
    }
}

#[derive(Debug, Clone)]
struct Buffers {
    history: Vec<f64>,
    terrain: Vec<f64>,
    enc_in: Vec<f32>,
    enc_out: Vec<f32>,
    terr_in: Vec<f32>,
    terr_out: Vec<f32>,
    plan_in: Vec<f32>,
    plan_out: Vec<f32>,
    dec_in: Vec<f32>,
    dec_out: Vec<f32>,
    pred_in: Vec<f32>,
    pred_out: Vec<f32>,
    preview: Vec<f64>,
}

impl Buffers {
    fn new(c: &ModelConfig) -> Self {
        let l = c.latent;
        Self {
            history: vec![0.0; c.history * STATE_DIM],
            terrain: vec![0.0; c.history * TERRAIN_CHANNELS],
            enc_in: vec![0.0; c.history * STATE_DIM],
            enc_out: vec![0.0; 2 * l],
            terr_in: vec![0.0; c.history * TERRAIN_CHANNELS],
            terr_out: vec![0.0; l],
            plan_in: vec![0.0; 2 + l],
            plan_out: vec![0.0; c.bins],
            dec_in: vec![0.0; c.decoder_input()],
            dec_out: vec![0.0; c.horizon * STATE_DIM],
            pred_in: vec![0.0; c.predictor_input()],
            pred_out: vec![0.0; c.horizon * CONTACT_DIM],
            preview: vec![0.0; c.horizon * STATE_DIM],
        }
    }
}

fn normalize_into(norm: &Normalizer, src: &[f64], dst: &mut [f32]) {
    let d = norm.dim();
    for (i, (s, o)) in src.iter().zip(dst.iter_mut()).enumerate() {
        *o = ((s - norm.mean[i % d]) / norm.std[i % d]) as f32;
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn micros(since: Instant) -> u32 {
    since.elapsed().as_micros().min(u32::MAX as u128) as u32
}

/// Closed-loop controller: owns the models, the terrain, the executed-state
/// history and the tracker.
#[derive(Debug, Clone)]
pub struct Controller {
    pub config: RuntimeConfig,
    models: RuntimeModels,
    map: HeightMap,
    state: ControllerState,
    tracker: Tracker,
    bufs: Buffers,
}

impl Controller {
    /// Warm-start from a short oracle episode in the gait nearest to
    /// `initial.g`, then set φ from the encoded planning dims.
    pub fn new(bundle: &ModelBundle, map: HeightMap, config: RuntimeConfig, initial: GaitCommand, seed: u64) -> Result<Self, RuntimeError> {
        config.validate()?;
        let initial = initial.validate()?;
        let models = RuntimeModels::from_bundle(bundle)?;
        let oracle = &models.oracle;
        let span = models.config.history_span();
        let gait = GaitParams {
            swing_height: oracle.swing_height,
            ..GaitParams::preset(GaitKind::nearest(initial.g))
        };
        let action = initial.limited_action();
        let spec = EpisodeSpec {
            gait,
            terrain_id: "warm-start".into(),
            commands: oracle::CommandSchedule::constant(action),
            duration: span as f64 / oracle.rate_hz,
            seed,
            amplitude: 1.0,
            phase0: None,
        };
        let ep = generate_episode(&spec, &map, oracle)?;
        let poses = ep.poses(oracle.geometry.nominal_height);
        let mut terrain = TerrainTracker::new(oracle.terrain, oracle.geometry)?;
        terrain.warm_start_at(&map, [0.0, 0.0], 0.0);
        let timing = gait.timing();
        let mut history = VecDeque::with_capacity(span);
        for (f, pose) in ep.frames.iter().zip(&poses) {
            terrain.step(&map, pose, &f.action, f.contacts, &timing)?;
            history.push_back((f.state, *pose));
        }
        let last = ep.frames.last().ok_or(RuntimeError::Config("empty warm-start episode".into()))?;
        let mut tracker = Tracker::new(config.tracker, oracle.geometry, last.state.q, poses[poses.len() - 1], last.contacts, &map);
        tracker.set_velocity(last.state.cdot);

        let latent = models.config.latent;
        let bufs = Buffers::new(&models.config);
        let mut c = Self {
            config,
            map,
            state: ControllerState {
                history,
                capacity: span,
                phi: 0.0,
                command: initial,
                action,
                terrain,
                contacts: last.contacts,
                z_r: vec![0.0; latent],
                z_g: vec![0.0; latent],
                tick: 0,
                overruns: 0,
                max_latency_us: 0,
            },
            tracker,
            bufs,
            models,
        };
        c.encode_terrain()?;
        c.encode_robot()?;
        let [i, j] = c.models.dims;
        c.state.phi = c.state.z_r[i].atan2(c.state.z_r[j]).rem_euclid(TAU);
        Ok(c)
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn models(&self) -> &RuntimeModels {
        &self.models
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    pub fn map(&self) -> &HeightMap {
        &self.map
    }

    pub fn rate_hz(&self) -> f64 {
        self.models.config.control_hz
    }

    fn encode_terrain(&mut self) -> Result<(), RuntimeError> {
        let b = &mut self.bufs;
        self.state.terrain.write_input(&mut b.terrain).map_err(|e| RuntimeError::stage("terrain_encode", e))?;
        normalize_into(&self.models.terrain_norm, &b.terrain, &mut b.terr_in);
        self.models
            .terrain
            .forward_into(&b.terr_in, &mut b.terr_out)
            .map_err(|e| RuntimeError::stage("terrain_encode", e))?;
        for (z, v) in self.state.z_g.iter_mut().zip(&b.terr_out) {
            *z = *v as f64;
        }
        Ok(())
    }

    fn encode_robot(&mut self) -> Result<(), RuntimeError> {
        let c = &self.models.config;
        let h = &self.state.history;
        if h.len() < c.history_span() {
            return Err(RuntimeError::stage("robot_encode", "history not warm"));
        }
        let start = h.len() - c.history_span();
        let frames = (0..c.history).map(|i| {
            let (s, p) = &h[start + i * c.encoder_stride];
            (s, p)
        });
        let b = &mut self.bufs;
        write_encoder_frames(frames, &mut b.history).map_err(|e| RuntimeError::stage("robot_encode", e))?;
        normalize_into(&self.models.input_norm, &b.history, &mut b.enc_in);
        self.models
            .encoder
            .forward_into(&b.enc_in, &mut b.enc_out)
            .map_err(|e| RuntimeError::stage("robot_encode", e))?;
        for (z, v) in self.state.z_r.iter_mut().zip(&b.enc_out) {
            *z = *v as f64;
        }
        Ok(())
    }

    fn write_conditioning(&self, z: &[f64], out: &mut [f32], with_terrain: bool) {
        let mut k = 0;
        for v in z {
            out[k] = *v as f32;
            k += 1;
        }
        if with_terrain {
            for v in &self.state.z_g {
                out[k] = *v as f32;
                k += 1;
            }
        }
        let n = &self.models.action_norm;
        for j in 0..ACTION_DIM {
            out[k] = ((self.state.action[j] - n.mean[j]) / n.std[j]) as f32;
            k += 1;
        }
        out[k] = self.state.command.g.clamp(-1.0, 1.0) as f32;
    }

    /// Stages (1)–(9): planning only, the tracker is not advanced.
    pub fn tick(&mut self, command: GaitCommand) -> Result<TickOutput, RuntimeError> {
        let t0 = Instant::now();
        let mut lat = StageLatencies::default();
        let command = command.validate()?;
        let dt = 1.0 / self.rate_hz();

        // (1) phase and command
        let mut t = Instant::now();
        self.state.command = command;
        let target = command.limited_action();
        let tau = self.config.action_time_constant;
        let k = if tau > 0.0 { 1.0 - (-dt / tau).exp() } else { 1.0 };
        for j in 0..ACTION_DIM {
            self.state.action[j] += k * (target[j] - self.state.action[j]);
        }
        self.state.phi = (self.state.phi + command.dphi).rem_euclid(TAU);
        let phi = self.state.phi;
        lat.stages_us[0] = micros(t);

        // (2) terrain pipeline on the latest executed pose
        t = Instant::now();
        let pose = self.state.history.back().map(|(_, p)| *p).ok_or(RuntimeError::stage("terrain", "empty history"))?;
        self.state
            .terrain
            .step(&self.map, &pose, &self.state.action, self.state.contacts, &gait_timing(command.g))
            .map_err(|e| RuntimeError::stage("terrain", e))?;
        lat.stages_us[1] = micros(t);

        // (3), (4)
        t = Instant::now();
        self.encode_terrain()?;
        lat.stages_us[2] = micros(t);
        t = Instant::now();
        self.encode_robot()?;
        lat.stages_us[3] = micros(t);

        // (5) planner
        t = Instant::now();
        {
            let b = &mut self.bufs;
            b.plan_in[0] = phi.sin() as f32;
            b.plan_in[1] = phi.cos() as f32;
            for (o, z) in b.plan_in[2..].iter_mut().zip(&self.state.z_g) {
                *o = *z as f32;
            }
            self.models
                .planner
                .forward_into(&b.plan_in, &mut b.plan_out)
                .map_err(|e| RuntimeError::stage("planner", e))?;
        }
        let logits = &self.bufs.plan_out;
        let m = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for (l, b) in logits.iter().zip(&self.models.bins) {
            let e = (*l as f64 - m).exp();
            num += e * b;
            den += e;
        }
        let bins = &self.models.bins;
        let radius = (num / den).clamp(bins[0], bins[bins.len() - 1]);
        if !radius.is_finite() {
            return Err(RuntimeError::stage("planner", "non-finite radius"));
        }
        lat.stages_us[4] = micros(t);

        // (6) override
        t = Instant::now();
        let mut z = self.state.z_r.clone();
        latent_override(&mut z, self.models.dims, radius, phi).map_err(|e| RuntimeError::stage("override", e))?;
        let z_plan = {
            let (a, b) = from_polar(radius, phi);
            [a, b]
        };
        lat.stages_us[5] = micros(t);

        // (7) decode
        t = Instant::now();
        let mut dec_in = std::mem::take(&mut self.bufs.dec_in);
        self.write_conditioning(&z, &mut dec_in, true);
        self.models
            .decoder
            .forward_into(&dec_in, &mut self.bufs.dec_out)
            .map_err(|e| RuntimeError::stage("decode", e))?;
        self.bufs.dec_in = dec_in;
        {
            let n = &self.models.target_norm;
            let b = &mut self.bufs;
            for (i, (o, v)) in b.preview.iter_mut().zip(&b.dec_out).enumerate() {
                *o = *v as f64 * n.std[i % STATE_DIM] + n.mean[i % STATE_DIM];
            }
        }
        let mut targets = [0.0; 12];
        targets.copy_from_slice(&self.bufs.preview[..12]);
        if !targets.iter().all(|v| v.is_finite()) {
            return Err(RuntimeError::stage("decode", "non-finite joint targets"));
        }
        lat.stages_us[6] = micros(t);

        // (8) contacts
        t = Instant::now();
        let mut pred_in = std::mem::take(&mut self.bufs.pred_in);
        self.write_conditioning(&z, &mut pred_in, false);
        self.models
            .predictor
            .forward_into(&pred_in, &mut self.bufs.pred_out)
            .map_err(|e| RuntimeError::stage("contacts", e))?;
        self.bufs.pred_in = pred_in;
        let mut contact_probs = [0.0; 4];
        for (p, l) in contact_probs.iter_mut().zip(&self.bufs.pred_out) {
            *p = sigmoid(*l as f64);
        }
        lat.stages_us[7] = micros(t);

        // (9) base pitch
        t = Instant::now();
        let filtered = self.state.terrain.filtered();
        let pitch = base_pitch_from_control(self.state.terrain.filtered_ahead(self.config.phase_lead), self.models.oracle.stance_length);
        lat.stages_us[8] = micros(t);

        self.state.tick += 1;
        lat.total_us = micros(t0);
        lat.overrun = lat.total_us as u64 > self.config.budget_us;
        if lat.overrun {
            self.state.overruns += 1;
        }
        self.state.max_latency_us = self.state.max_latency_us.max(lat.total_us);

        Ok(TickOutput {
            tick: self.state.tick,
            phi,
            dphi: command.dphi,
            radius,
            z_plan,
            g: command.g,
            action: self.state.action,
            targets,
            contact_probs,
            preview: self.bufs.preview.clone(),
            pitch,
            filtered,
            latency: lat,
        })
    }

    /// One closed-loop tick: plan, execute through the tracker and record the
    /// executed state.
    pub fn step(&mut self, command: GaitCommand) -> Result<StepOutput, RuntimeError> {
        let tick = self.tick(command)?;
        let th = self.config.contact_threshold;
        let contacts = tick.contact_probs.map(|p| p > th);
        let tracked = self.tracker.step(&tick.targets, contacts, tick.pitch, &self.map);
        self.state.contacts = contacts;
        self.state.push(tracked.state, tracked.pose);
        Ok(StepOutput { tick, contacts, tracked })
    }
}
