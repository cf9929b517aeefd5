use rand::Rng;

use super::{ModelConfig, ModelError, Normalizer, ACTION_DIM, CONTACT_DIM, TERRAIN_CHANNELS};
use crate::kinematics::{pose_log, BasePose};
use crate::nn::{Activation, DenseNet, GaussianCode};
use crate::oracle::{layout, RobotState, STATE_DIM};

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::Shape { what, expected, got })
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Write encoder frames (state vectors with the pose delta replaced by the
/// pose relative to the first frame). Returns the number of frames written.
pub fn write_encoder_frames<'a>(
    frames: impl IntoIterator<Item = (&'a RobotState, &'a BasePose)>,
    out: &mut [f64],
) -> Result<usize, ModelError> {
    let mut reference: Option<BasePose> = None;
    let mut n = 0;
    for (state, pose) in frames {
        let row = out.get_mut(n * STATE_DIM..(n + 1) * STATE_DIM).ok_or(ModelError::Shape {
            what: "encoder buffer",
            expected: (n + 1) * STATE_DIM,
            got: 0,
        })?;
        state.write_into(row);
        let r = *reference.get_or_insert(*pose);
        row[layout::DPOSE..layout::DPOSE + 6].copy_from_slice(&pose_log(&r, pose).0);
        n += 1;
    }
    check_len("encoder buffer", n * STATE_DIM, out.len())?;
    Ok(n)
}

/// Robot VAE: encoder, decoder and contact predictor plus the feature
/// normalizers they were trained with.
#[derive(Debug, Clone)]
pub struct VaeModel {
    pub config: ModelConfig,
    pub encoder: DenseNet,
    pub decoder: DenseNet,
    pub predictor: DenseNet,
    pub input_norm: Normalizer,
    pub target_norm: Normalizer,
    pub action_norm: Normalizer,
}

impl VaeModel {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self, ModelError> {
        config.validate()?;
        let w = config.width;
        let l = config.latent;
        Ok(Self {
            encoder: DenseNet::new(&[config.history * STATE_DIM, w, w, 2 * l], Activation::Tanh, rng),
            decoder: DenseNet::new(&[config.decoder_input(), w, w, config.horizon * STATE_DIM], Activation::Tanh, rng),
            predictor: DenseNet::new(&[config.predictor_input(), w, w, config.horizon * CONTACT_DIM], Activation::Tanh, rng),
            input_norm: Normalizer::identity(STATE_DIM),
            target_norm: Normalizer::identity(STATE_DIM),
            action_norm: Normalizer::identity(ACTION_DIM),
            config,
        })
    }

    pub fn check_shapes(&self) -> Result<(), ModelError> {
        let c = &self.config;
        check_len("encoder input", c.history * STATE_DIM, self.encoder.in_dim())?;
        check_len("encoder output", 2 * c.latent, self.encoder.out_dim())?;
        check_len("decoder input", c.decoder_input(), self.decoder.in_dim())?;
        check_len("decoder output", c.horizon * STATE_DIM, self.decoder.out_dim())?;
        check_len("predictor input", c.predictor_input(), self.predictor.in_dim())?;
        check_len("predictor output", c.horizon * CONTACT_DIM, self.predictor.out_dim())?;
        check_len("input normalizer", STATE_DIM, self.input_norm.dim())?;
        check_len("target normalizer", STATE_DIM, self.target_norm.dim())?;
        check_len("action normalizer", ACTION_DIM, self.action_norm.dim())
    }

    /// Encode a raw history (`N` frames from [`write_encoder_frames`]).
    pub fn encode_robot(&self, history: &[f64]) -> Result<GaussianCode, ModelError> {
        check_len("encoder history", self.config.history * STATE_DIM, history.len())?;
        let mut x = history.to_vec();
        self.input_norm.apply(&mut x)?;
        Ok(GaussianCode::from_head(&self.encoder.forward(&x)?)?)
    }

    pub fn normalized_action(&self, a: &[f64; 3]) -> [f64; 3] {
        let mut v = *a;
        for j in 0..ACTION_DIM {
            v[j] = (v[j] - self.action_norm.mean[j]) / self.action_norm.std[j];
        }
        v
    }

    pub fn decoder_input(&self, z_r: &[f64], z_g: &[f64], a: &[f64; 3], g: f64) -> Result<Vec<f64>, ModelError> {
        check_len("robot code", self.config.latent, z_r.len())?;
        check_len("terrain code", self.config.latent, z_g.len())?;
        let mut x = Vec::with_capacity(self.config.decoder_input());
        x.extend_from_slice(z_r);
        x.extend_from_slice(z_g);
        x.extend_from_slice(&self.normalized_action(a));
        x.push(g.clamp(-1.0, 1.0));
        Ok(x)
    }

    pub fn predictor_input(&self, z_r: &[f64], a: &[f64; 3], g: f64) -> Result<Vec<f64>, ModelError> {
        check_len("robot code", self.config.latent, z_r.len())?;
        let mut x = Vec::with_capacity(self.config.predictor_input());
        x.extend_from_slice(z_r);
        x.extend_from_slice(&self.normalized_action(a));
        x.push(g.clamp(-1.0, 1.0));
        Ok(x)
    }

    /// `M` future states (row-major, physical units).
    pub fn decode(&self, z_r: &[f64], z_g: &[f64], a: &[f64; 3], g: f64) -> Result<Vec<f64>, ModelError> {
        let mut y = self.decoder.forward(&self.decoder_input(z_r, z_g, a, g)?)?;
        self.target_norm.invert(&mut y)?;
        Ok(y)
    }

    /// `M × 4` contact probabilities.
    pub fn predict_contacts(&self, z_r: &[f64], a: &[f64; 3], g: f64) -> Result<Vec<f64>, ModelError> {
        let logits = self.predictor.forward(&self.predictor_input(z_r, a, g)?)?;
        Ok(logits.into_iter().map(sigmoid).collect())
    }
}

#[derive(Debug, Clone)]
pub struct TerrainAutoencoder {
    pub encoder: DenseNet,
    /// Only present while training.
    pub decoder: Option<DenseNet>,
    pub norm: Normalizer,
}

impl TerrainAutoencoder {
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let n = config.history * TERRAIN_CHANNELS;
        let w = config.width;
        Self {
            encoder: DenseNet::new(&[n, w, w, config.latent], Activation::Tanh, rng),
            decoder: Some(DenseNet::new(&[config.latent, w, w, n], Activation::Tanh, rng)),
            norm: Normalizer::identity(TERRAIN_CHANNELS),
        }
    }

    pub fn encode_terrain(&self, x_g: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_len("terrain input", self.encoder.in_dim(), x_g.len())?;
        let mut x = x_g.to_vec();
        self.norm.apply(&mut x)?;
        Ok(self.encoder.forward(&x)?)
    }

    pub fn decode_terrain(&self, z_g: &[f64]) -> Result<Vec<f64>, ModelError> {
        let dec = self.decoder.as_ref().ok_or(ModelError::Missing("terrain decoder"))?;
        check_len("terrain code", dec.in_dim(), z_g.len())?;
        let mut y = dec.forward(z_g)?;
        self.norm.invert(&mut y)?;
        Ok(y)
    }
}
