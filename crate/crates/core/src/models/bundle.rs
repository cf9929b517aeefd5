//! Model bundle directory: `bundle.json` plus one weight manifest per head.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, Normalizer, PlannerModel, TerrainAutoencoder, VaeModel};
use crate::nn::persist::{load_net, save_net, Dtype};
use crate::oracle::OracleConfig;

pub const BUNDLE_SCHEMA: u32 = 1;
const DESCRIPTOR: &str = "bundle.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub input: Normalizer,
    pub target: Normalizer,
    pub action: Normalizer,
    pub terrain: Normalizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleDescriptor {
    pub schema: u32,
    #[serde(rename = "N")]
    pub history: usize,
    #[serde(rename = "M")]
    pub horizon: usize,
    pub encoder_hz: f64,
    pub decoder_hz: f64,
    pub control_hz: f64,
    pub model: ModelConfig,
    pub planning_dims: Option<[usize; 2]>,
    pub bins: Vec<f64>,
    pub normalizers: Normalizers,
    pub oracle: OracleConfig,
    /// Head name → manifest stem.
    pub heads: Vec<String>,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub vae: VaeModel,
    pub terrain: TerrainAutoencoder,
    pub planner: Option<PlannerModel>,
    pub planning_dims: Option<[usize; 2]>,
    pub oracle: OracleConfig,
    pub seed: u64,
    pub config_hash: String,
}

impl ModelBundle {
    pub fn config(&self) -> &ModelConfig {
        &self.vae.config
    }

    pub fn planning_dims(&self) -> Result<[usize; 2], ModelError> {
        self.planning_dims.ok_or(ModelError::Missing("planning dims"))
    }

    pub fn planner(&self) -> Result<&PlannerModel, ModelError> {
        self.planner.as_ref().ok_or(ModelError::Missing("planner"))
    }

    pub fn descriptor(&self) -> BundleDescriptor {
        let c = self.vae.config;
        let mut heads = vec!["vae_encoder", "vae_decoder", "vae_predictor", "terrain_encoder"];
        if self.terrain.decoder.is_some() {
            heads.push("terrain_decoder");
        }
        if self.planner.is_some() {
            heads.push("planner");
        }
        BundleDescriptor {
            schema: BUNDLE_SCHEMA,
            history: c.history,
            horizon: c.horizon,
            encoder_hz: c.encoder_hz(),
            decoder_hz: c.control_hz,
            control_hz: c.control_hz,
            model: c,
            planning_dims: self.planning_dims,
            bins: self
                .planner
                .as_ref()
                .map(|p| p.bins.clone())
                .unwrap_or_else(|| super::planner::uniform_bins(c.bins, c.r_max)),
            normalizers: Normalizers {
                input: self.vae.input_norm.clone(),
                target: self.vae.target_norm.clone(),
                action: self.vae.action_norm.clone(),
                terrain: self.terrain.norm.clone(),
            },
            oracle: self.oracle.clone(),
            heads: heads.into_iter().map(String::from).collect(),
            seed: self.seed,
            config_hash: self.config_hash.clone(),
        }
    }

    /// Write the bundle directory, replacing any previous contents' files.
    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        fs::create_dir_all(dir)?;
        let d = Dtype::F64;
        save_net(&self.vae.encoder, dir, "vae_encoder", d)?;
        save_net(&self.vae.decoder, dir, "vae_decoder", d)?;
        save_net(&self.vae.predictor, dir, "vae_predictor", d)?;
        save_net(&self.terrain.encoder, dir, "terrain_encoder", d)?;
        if let Some(dec) = &self.terrain.decoder {
            save_net(dec, dir, "terrain_decoder", d)?;
        }
        if let Some(p) = &self.planner {
            save_net(&p.net, dir, "planner", d)?;
        }
        fs::write(dir.join(DESCRIPTOR), serde_json::to_string_pretty(&self.descriptor())?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, ModelError> {
        let desc: BundleDescriptor = serde_json::from_str(&fs::read_to_string(dir.join(DESCRIPTOR))?)?;
        if desc.schema != BUNDLE_SCHEMA {
            return Err(ModelError::Schema {
                found: desc.schema,
                expected: BUNDLE_SCHEMA,
            });
        }
        desc.model.validate()?;
        let has = |h: &str| desc.heads.iter().any(|x| x == h);
        let n = desc.normalizers;
        let vae = VaeModel {
            config: desc.model,
            encoder: load_net(dir, "vae_encoder")?,
            decoder: load_net(dir, "vae_decoder")?,
            predictor: load_net(dir, "vae_predictor")?,
            input_norm: n.input,
            target_norm: n.target,
            action_norm: n.action,
        };
        vae.check_shapes()?;
        let terrain = TerrainAutoencoder {
            encoder: load_net(dir, "terrain_encoder")?,
            decoder: if has("terrain_decoder") {
                Some(load_net(dir, "terrain_decoder")?)
            } else {
                None
            },
            norm: n.terrain,
        };
        let planner = if has("planner") {
            Some(PlannerModel::from_parts(load_net(dir, "planner")?, desc.bins)?)
        } else {
            None
        };
        if let Some([i, j]) = desc.planning_dims {
            if i == j {
                return Err(ModelError::SamePlanningDims(i));
            }
            for dim in [i, j] {
                if dim >= desc.model.latent {
                    return Err(ModelError::PlanningDimRange {
                        dim,
                        latent: desc.model.latent,
                    });
                }
            }
        }
        Ok(Self {
            vae,
            terrain,
            planner,
            planning_dims: desc.planning_dims,
            oracle: desc.oracle,
            seed: desc.seed,
            config_hash: desc.config_hash,
        })
    }
}
