//! Loss assembly, GECO-controlled VAE training, planning-dim selection,
//! planner dataset extraction and planner training.

mod data;
mod loss;
mod train;

pub use data::{Batch, EpisodeData, FeatureNorms, RawWindow, TrainingSet, Window};
pub use loss::{
    planner_inputs, planner_loss, terrain_loss, vae_loss, GecoState, LossPass, PlannerLossBreakdown, PlannerSample,
    TerrainGradients, TerrainLossBreakdown, VaeGradients, VaeLossBreakdown,
};
pub use train::{
    encode_windows, evaluate_planner, evaluate_vae, extract_planner_dataset, select_lowest_two, select_planning_dims, stride_winding,
    train_planner, train_vae, DimSelection, EncodedWindows, EpochLog, HeldoutMetrics, PlannerReport, VaeReport,
};

use serde::{Deserialize, Serialize};

use crate::models::ModelError;
use crate::nn::NnError;
use crate::oracle::{GaitKind, OracleError};
use crate::terrain::TerrainError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub batch: usize,
    pub learning_rate: f64,
    pub vae_steps: usize,
    pub planner_steps: usize,
    /// Control ticks between consecutive training windows.
    pub window_stride: usize,
    /// Every n-th episode of each gait is held out (0 = none).
    pub heldout_every: usize,
    pub gamma: f64,
    pub initial_beta: f64,
    pub geco_rate: f64,
    pub geco_decay: f64,
    /// κ = kappa_scale × stride-shift MSE, but at least kappa_floor.
    pub kappa_scale: f64,
    pub kappa_floor: f64,
    pub divergence_factor: f64,
    pub divergence_patience: usize,
    pub planner_gait: GaitKind,
    /// Encoded windows used when ranking latent variances.
    pub selection_every: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch: 64,
            learning_rate: 3e-4,
            vae_steps: 12_000,
            planner_steps: 3_000,
            window_stride: 8,
            heldout_every: 7,
            gamma: 1.0,
            initial_beta: 1.0,
            geco_rate: 1e-2,
            geco_decay: 0.99,
            kappa_scale: 10.0,
            kappa_floor: 0.01,
            divergence_factor: 10.0,
            divergence_patience: 100,
            planner_gait: GaitKind::Trot,
            selection_every: 2,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch == 0 || self.window_stride == 0 {
            return Err(TrainError::Config("batch and window_stride must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.initial_beta > 0.0) {
            return Err(TrainError::Config("learning_rate and initial_beta must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.geco_decay) || self.geco_rate < 0.0 {
            return Err(TrainError::Config("geco_decay must lie in [0, 1) and geco_rate ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("non-finite {what} output at batch index {batch_index}")]
    NonFinite { what: &'static str, batch_index: usize },
    #[error("training diverged at step {step}: loss {loss:.4e} stayed above {factor}× the initial {initial:.4e} for {patience} steps")]
    Diverged {
        step: usize,
        loss: f64,
        initial: f64,
        factor: f64,
        patience: usize,
    },
    #[error("{what}: expected {expected} values, got {got}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("dataset yields no training windows")]
    NoWindows,
    #[error("no {0} episodes available for planner training")]
    NoPlannerData(GaitKind),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Terrain(#[from] TerrainError),
}
