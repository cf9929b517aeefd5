//! Height maps and the terrain input pipeline.

mod filter;
mod footholds;
mod heightmap;
mod input;
mod tracker;

pub use filter::{design_filter, natural_frequency, overshoot, settling_time, LtiFilter};
pub use footholds::{
    command_velocity_world, control_pitch, predict_foothold, predict_footholds, ContactTimers, ControlPitch, GaitTiming,
};
pub use heightmap::{HeightMap, HeightSample, DEFAULT_STEP_EDGE};
pub use input::{build_terrain_input, TerrainInput, TerrainRing};
pub use tracker::{TerrainConfig, TerrainTick, TerrainTracker};

#[derive(Debug, thiserror::Error)]
pub enum TerrainError {
    #[error("query ({x:.3}, {y:.3}) outside height map (clamped height {clamped_height:.4})")]
    OutOfBounds { x: f64, y: f64, clamped_height: f64 },
    #[error("invalid height map: {0}")]
    InvalidMap(String),
    #[error("unknown terrain '{0}' (expected flat, step:h[,edge], stairs:h,w,n or a map file)")]
    UnknownTerrain(String),
    #[error("invalid filter parameters: rise time {rise_time}, damping {zeta}, dt {dt}")]
    InvalidFilter { rise_time: f64, zeta: f64, dt: f64 },
    #[error("non-finite filter input")]
    NonFiniteInput,
    #[error("terrain history holds {have} samples, {need} required")]
    Underfilled { have: usize, need: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
