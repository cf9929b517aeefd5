//! Episode preprocessing and window/batch assembly.

use std::collections::HashMap;

use ndarray::{Array1, Array2};

use super::TrainError;
use crate::kinematics::{pose_log, BasePose};
use crate::models::{ModelConfig, Normalizer, NormalizerFit, ACTION_DIM, CONTACT_DIM, TERRAIN_CHANNELS};
use crate::oracle::{layout, replay_terrain, Episode, GaitKind, OracleConfig, STATE_DIM};
use crate::terrain::HeightMap;

/// One episode in the arrays the trainer consumes.
#[derive(Debug, Clone)]
pub struct EpisodeData {
    pub gait: GaitKind,
    pub label: f64,
    pub terrain: String,
    pub heldout: bool,
    pub stride_frames: usize,
    pub states: Vec<[f64; STATE_DIM]>,
    pub poses: Vec<BasePose>,
    pub contacts: Vec<[bool; 4]>,
    pub actions: Vec<[f64; 3]>,
    /// Filtered control pitch per frame.
    pub pitch: Vec<[f64; 2]>,
}

impl EpisodeData {
    pub fn from_episode(ep: &Episode, map: &HeightMap, oracle: &OracleConfig, heldout: bool) -> Result<Self, TrainError> {
        let ticks = replay_terrain(ep, map, oracle)?;
        Ok(Self {
            gait: ep.header.gait,
            label: ep.gait_label(),
            terrain: ep.header.terrain.clone(),
            heldout,
            stride_frames: (ep.header.stride_period * ep.header.frame_rate).round() as usize,
            states: ep.frames.iter().map(|f| f.state.to_vector()).collect(),
            poses: ep.poses(oracle.geometry.nominal_height),
            contacts: ep.frames.iter().map(|f| f.contacts).collect(),
            actions: ep.frames.iter().map(|f| f.action).collect(),
            pitch: ticks.iter().map(|t| t.filtered).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Current frame `frame` of episode `episode`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Window {
    pub episode: usize,
    pub frame: usize,
}

/// Raw (unnormalized) arrays for one window.
#[derive(Debug, Clone)]
pub struct RawWindow {
    pub history: Vec<f64>,
    pub terrain: Vec<f64>,
    pub target: Vec<f64>,
    pub contacts: Vec<f64>,
    pub action: [f64; 3],
    pub label: f64,
}

/// Normalized, batched training arrays.
#[derive(Debug, Clone)]
pub struct Batch {
    pub history: Array2<f64>,
    pub terrain: Array2<f64>,
    pub target: Array2<f64>,
    pub contacts: Array2<f64>,
    pub action: Array2<f64>,
    pub label: Array1<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.history.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNorms {
    pub input: Normalizer,
    pub target: Normalizer,
    pub action: Normalizer,
    pub terrain: Normalizer,
}

impl FeatureNorms {
    pub fn identity() -> Self {
        Self {
            input: Normalizer::identity(STATE_DIM),
            target: Normalizer::identity(STATE_DIM),
            action: Normalizer::identity(ACTION_DIM),
            terrain: Normalizer::identity(TERRAIN_CHANNELS),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub config: ModelConfig,
    pub episodes: Vec<EpisodeData>,
    pub train: Vec<Window>,
    pub heldout: Vec<Window>,
}

impl TrainingSet {
    /// Preprocess episodes. Within each gait, every `heldout_every`-th
    /// episode (1-based) goes to the held-out split; 0 disables holding out.
    pub fn build(
        episodes: &[Episode],
        config: ModelConfig,
        oracle: &OracleConfig,
        window_stride: usize,
        heldout_every: usize,
    ) -> Result<Self, TrainError> {
        let mut maps: HashMap<String, HeightMap> = HashMap::new();
        let mut per_gait: HashMap<GaitKind, usize> = HashMap::new();
        let mut data = Vec::with_capacity(episodes.len());
        for ep in episodes {
            let i = per_gait.entry(ep.header.gait).or_insert(0);
            let heldout = heldout_every > 0 && *i % heldout_every == heldout_every - 1;
            *i += 1;
            if !maps.contains_key(&ep.header.terrain) {
                maps.insert(ep.header.terrain.clone(), HeightMap::resolve(&ep.header.terrain)?);
            }
            data.push(EpisodeData::from_episode(ep, &maps[&ep.header.terrain], oracle, heldout)?);
        }
        Self::from_data(data, config, window_stride)
    }

    pub fn from_data(episodes: Vec<EpisodeData>, config: ModelConfig, window_stride: usize) -> Result<Self, TrainError> {
        config.validate()?;
        if window_stride == 0 {
            return Err(TrainError::Config("window stride must be positive".into()));
        }
        let first = config.history_span() - 1;
        let mut train = Vec::new();
        let mut heldout = Vec::new();
        for (e, ep) in episodes.iter().enumerate() {
            let mut k = first;
            while k + config.horizon < ep.len() {
                let w = Window { episode: e, frame: k };
                if ep.heldout {
                    heldout.push(w);
                } else {
                    train.push(w);
                }
                k += window_stride;
            }
        }
        if train.is_empty() {
            return Err(TrainError::NoWindows);
        }
        Ok(Self {
            config,
            episodes,
            train,
            heldout,
        })
    }

    pub fn raw_window(&self, w: Window) -> RawWindow {
        let c = &self.config;
        let ep = &self.episodes[w.episode];
        let mut history = vec![0.0; c.history * STATE_DIM];
        self.write_history(w, &mut history);
        let mut terrain = vec![0.0; c.history * TERRAIN_CHANNELS];
        self.write_terrain(w, &mut terrain);
        let mut target = Vec::with_capacity(c.horizon * STATE_DIM);
        let mut contacts = Vec::with_capacity(c.horizon * CONTACT_DIM);
        for j in 1..=c.horizon {
            target.extend_from_slice(&ep.states[w.frame + j]);
            contacts.extend(ep.contacts[w.frame + j].iter().map(|&b| if b { 1.0 } else { 0.0 }));
        }
        RawWindow {
            history,
            terrain,
            target,
            contacts,
            action: ep.actions[w.frame],
            label: ep.label,
        }
    }

    /// Encoder frames every `encoder_stride` ticks ending at the window frame,
    /// poses relative to the earliest one.
    pub fn write_history(&self, w: Window, out: &mut [f64]) {
        let c = &self.config;
        let ep = &self.episodes[w.episode];
        let start = w.frame + 1 - c.history_span();
        let reference = ep.poses[start];
        for i in 0..c.history {
            let k = start + i * c.encoder_stride;
            let row = &mut out[i * STATE_DIM..(i + 1) * STATE_DIM];
            row.copy_from_slice(&ep.states[k]);
            row[layout::DPOSE..layout::DPOSE + 6].copy_from_slice(&pose_log(&reference, &ep.poses[k]).0);
        }
    }

    /// Filtered control pitch for the last `history` ticks, oldest first.
    pub fn write_terrain(&self, w: Window, out: &mut [f64]) {
        let ep = &self.episodes[w.episode];
        let n = self.config.history;
        for i in 0..n {
            let p = ep.pitch[w.frame + 1 + i - n];
            out[2 * i] = p[0];
            out[2 * i + 1] = p[1];
        }
    }

    /// Fit feature normalizers on (every `every`-th) training window.
    pub fn fit_norms(&self, every: usize) -> FeatureNorms {
        let mut input = NormalizerFit::new(STATE_DIM);
        let mut target = NormalizerFit::new(STATE_DIM);
        let mut action = NormalizerFit::new(ACTION_DIM);
        let mut terrain = NormalizerFit::new(TERRAIN_CHANNELS);
        let mut buf = vec![0.0; self.config.history * STATE_DIM];
        for w in self.train.iter().step_by(every.max(1)) {
            self.write_history(*w, &mut buf);
            input.push(&buf);
            action.push(&self.episodes[w.episode].actions[w.frame]);
        }
        for ep in self.episodes.iter().filter(|e| !e.heldout) {
            for s in &ep.states {
                target.push(s);
            }
            for p in &ep.pitch {
                terrain.push(p);
            }
        }
        FeatureNorms {
            input: input.finish(),
            target: target.finish(),
            action: action.finish(),
            terrain: terrain.finish(),
        }
    }

    pub fn batch(&self, windows: &[Window], norms: &FeatureNorms) -> Result<Batch, TrainError> {
        let c = &self.config;
        let b = windows.len();
        let mut out = Batch {
            history: Array2::zeros((b, c.history * STATE_DIM)),
            terrain: Array2::zeros((b, c.history * TERRAIN_CHANNELS)),
            target: Array2::zeros((b, c.horizon * STATE_DIM)),
            contacts: Array2::zeros((b, c.horizon * CONTACT_DIM)),
            action: Array2::zeros((b, ACTION_DIM)),
            label: Array1::zeros(b),
        };
        for (r, &w) in windows.iter().enumerate() {
            let ep = &self.episodes[w.episode];
            {
                let mut row = out.history.row_mut(r);
                let h = row.as_slice_mut().expect("standard layout");
                self.write_history(w, h);
                norms.input.apply(h)?;
            }
            {
                let mut row = out.terrain.row_mut(r);
                let t = row.as_slice_mut().expect("standard layout");
                self.write_terrain(w, t);
                norms.terrain.apply(t)?;
            }
            {
                let mut row = out.target.row_mut(r);
                let t = row.as_slice_mut().expect("standard layout");
                for j in 0..c.horizon {
                    t[j * STATE_DIM..(j + 1) * STATE_DIM].copy_from_slice(&ep.states[w.frame + 1 + j]);
                }
                norms.target.apply(t)?;
            }
            for j in 0..c.horizon {
                for leg in 0..CONTACT_DIM {
                    out.contacts[[r, j * CONTACT_DIM + leg]] = if ep.contacts[w.frame + 1 + j][leg] { 1.0 } else { 0.0 };
                }
            }
            let mut a = ep.actions[w.frame];
            for j in 0..ACTION_DIM {
                a[j] = (a[j] - norms.action.mean[j]) / norms.action.std[j];
                out.action[[r, j]] = a[j];
            }
            out.label[r] = ep.label;
        }
        Ok(out)
    }

    /// MSE (normalized units) of predicting each target frame by the frame
    /// one stride earlier, over flat-ground windows (all windows when there
    /// are none).
    pub fn stride_shift_mse(&self, norms: &FeatureNorms, every: usize) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        let h = self.config.horizon;
        let any_flat = self.train.iter().any(|w| self.episodes[w.episode].terrain == "flat");
        for w in self.train.iter().step_by(every.max(1)) {
            let ep = &self.episodes[w.episode];
            if any_flat && ep.terrain != "flat" {
                continue;
            }
            let p = ep.stride_frames;
            if p == 0 || w.frame + 1 < p {
                continue;
            }
            for j in 1..=h {
                let a = &ep.states[w.frame + j];
                let b = &ep.states[w.frame + j - p];
                for f in 0..STATE_DIM {
                    let d = (a[f] - b[f]) / norms.target.std[f];
                    sum += d * d;
                }
                n += STATE_DIM;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}
