//! Closed-loop deployment: the 400 Hz tick, the kinematic tracker stand-in,
//! metrics, latent-map export, rollouts and the snapshot service.

mod command;
mod controller;
mod latent_map;
mod metrics;
mod rollout;
#[cfg(feature = "serve")]
mod serve;
mod tracker;

pub use command::{default_dphi, gait_timing, stride_period, velocity_limit, CommandSchedule, GaitCommand, ScheduleSegment};
pub use controller::{Controller, ControllerState, RuntimeModels, StageLatencies, StepOutput, TickOutput, STAGES};
pub use latent_map::{latent_slice_map, LatentMap, LatentMapSpec};
pub use metrics::{joint_rmse, swing_metrics, ContactClass, Swing, SwingMetrics, TimingSummary};
pub use rollout::{read_log, rollout, write_log, LogHeader, Rollout, RolloutOptions, Scenario, ScenarioFile, TickRecord};
#[cfg(feature = "serve")]
pub use serve::{parse_command, serve, BaseSnapshot, ClientMessage, ServeHandle, ServeOptions, ServeStats, Snapshot};
pub use tracker::{replay_episode, Replay, Tracker, TrackerConfig, TrackerOutput};

use serde::{Deserialize, Serialize};

use crate::models::ModelError;
use crate::oracle::OracleError;
use crate::terrain::TerrainError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuntimeConfig {
    pub tracker: TrackerConfig,
    /// Ticks of look-ahead applied to the base-pitch command.
    pub phase_lead: usize,
    pub budget_us: u64,
    /// Smoothing of the velocity action (s).
    pub action_time_constant: f64,
    /// Contact probability threshold.
    pub contact_threshold: f64,
    pub snapshot_hz: f64,
    /// Joint-RMSE window (s).
    pub rmse_window: f64,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            tracker: TrackerConfig::default(),
            phase_lead: 0,
            budget_us: 2500,
            action_time_constant: 0.25,
            contact_threshold: 0.5,
            snapshot_hz: 20.0,
            rmse_window: 5.0,
        }
    }
}

impl RuntimeConfig {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        let t = &self.tracker;
        if !(t.time_constant > 0.0 && t.max_rate > 0.0 && t.velocity_time_constant >= 0.0) {
            return Err(RuntimeError::Config("tracker time constant and rate limit must be positive".into()));
        }
        if !(self.action_time_constant >= 0.0) || !(self.snapshot_hz > 0.0) || !(self.rmse_window > 0.0) {
            return Err(RuntimeError::Config("time constants and rates must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.contact_threshold) {
            return Err(RuntimeError::Config("contact threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error("stage {stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("invalid runtime config: {0}")]
    Config(String),
    #[error("window of {got} ticks is shorter than the required {need}")]
    WindowTooShort { need: usize, got: usize },
    #[error("unknown scenario '{0}' (expected flat, step:h, transition or a schedule file)")]
    UnknownScenario(String),
    #[error("log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Terrain(#[from] TerrainError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RuntimeError {
    pub(crate) fn stage(stage: &'static str, e: impl std::fmt::Display) -> Self {
        RuntimeError::Stage {
            stage,
            message: e.to_string(),
        }
    }
}
