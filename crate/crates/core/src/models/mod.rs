//! Learned heads: robot VAE (encoder, decoder, contact predictor), terrain
//! autoencoder and the binned-radius planner, plus bundle I/O.

mod bundle;
mod heads;
mod normalize;
mod planner;

pub use bundle::{BundleDescriptor, ModelBundle, Normalizers, BUNDLE_SCHEMA};
pub use heads::{write_encoder_frames, TerrainAutoencoder, VaeModel};
pub use normalize::{Normalizer, NormalizerFit};
pub use planner::{from_polar, latent_override, softmax, to_polar, uniform_bins, PlannerModel, PlannerOutput};

use serde::{Deserialize, Serialize};

use crate::nn::NnError;

pub const ACTION_DIM: usize = 3;
pub const CONTACT_DIM: usize = 4;
pub const TERRAIN_CHANNELS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub width: usize,
    pub latent: usize,
    /// Encoder frames (N).
    pub history: usize,
    /// Decoded frames (M).
    pub horizon: usize,
    /// Control ticks between encoder frames (f_c / f_enc).
    pub encoder_stride: usize,
    pub control_hz: f64,
    pub bins: usize,
    pub r_max: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            width: 256,
            latent: 10,
            history: 80,
            horizon: 20,
            encoder_stride: 8,
            control_hz: 400.0,
            bins: 64,
            r_max: 6.0,
        }
    }
}

impl ModelConfig {
    pub fn encoder_hz(&self) -> f64 {
        self.control_hz / self.encoder_stride as f64
    }

    /// Control ticks spanned by the encoder history, inclusive of both ends.
    pub fn history_span(&self) -> usize {
        (self.history - 1) * self.encoder_stride + 1
    }

    /// `[z_r, z_g, a, g]`
    pub fn decoder_input(&self) -> usize {
        2 * self.latent + ACTION_DIM + 1
    }

    /// `[z_r, a, g]`
    pub fn predictor_input(&self) -> usize {
        self.latent + ACTION_DIM + 1
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.width == 0 || self.latent < 2 || self.history == 0 || self.horizon == 0 || self.encoder_stride == 0 {
            return Err(ModelError::Config("width, history, horizon, stride must be positive and latent ≥ 2".into()));
        }
        if self.bins < 2 || !(self.r_max > 0.0) {
            return Err(ModelError::Config("planner needs ≥ 2 bins and r_max > 0".into()));
        }
        if !(self.control_hz > 0.0) {
            return Err(ModelError::Config("control_hz must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("{what}: expected length {expected}, got {got}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("planning dims must differ (got {0} twice)")]
    SamePlanningDims(usize),
    #[error("planning dim {dim} out of range for latent size {latent}")]
    PlanningDimRange { dim: usize, latent: usize },
    #[error("bin values must be strictly increasing with at least two bins")]
    InvalidBins,
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("bundle has no {0}")]
    Missing(&'static str),
    #[error("bundle schema {found} is not supported (expected {expected})")]
    Schema { found: u32, expected: u32 },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
