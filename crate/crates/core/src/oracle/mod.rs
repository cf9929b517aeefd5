//! Scripted gait expert and dataset I/O.

mod corpus;
mod dataset;
mod episode;
mod forces;
mod gait;
mod generate;
mod replay;

pub use corpus::{climb_speed, generate_corpus, plan_corpus, speed_limit, CorpusOptions, TerrainMode};
pub use dataset::{open_dataset, read_dataset, write_dataset, DatasetReader, DatasetWriter};
pub use episode::{layout, Episode, EpisodeHeader, Frame, RobotState, SCHEMA_VERSION, STATE_DIM};
pub use forces::{distribute_weight, joint_torques, GRAVITY};
pub use gait::{
    contact_schedule, level_blend, swing_profile, GaitKind, GaitParams, NOMINAL_SWING_HEIGHT, SWING_DURATION,
};
pub use replay::replay_terrain;
pub use generate::{
    base_pitch_from_control, generate_episode, CommandSchedule, CommandSegment, EpisodeSpec, OracleConfig,
};

use crate::kinematics::KinematicsError;
use crate::terrain::TerrainError;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("unknown gait '{0}' (expected trot, crawl or pace)")]
    UnknownGait(String),
    #[error("invalid gait parameters: {0}")]
    InvalidGait(String),
    #[error("command {command:?} exceeds the oracle speed limit {limit} m/s")]
    CommandLimit { command: [f64; 3], limit: f64 },
    #[error("frame {frame}: leg {leg} target unreachable: {source}")]
    Unreachable {
        frame: usize,
        leg: usize,
        #[source]
        source: KinematicsError,
    },
    #[error("frame {frame}: foothold ({x:.3}, {y:.3}) outside the height map")]
    OffMap { frame: usize, x: f64, y: f64 },
    #[error("dataset schema version {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("episode {episode} truncated: {got} of {expected} frames")]
    Truncated { episode: usize, expected: usize, got: usize },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("cannot open {path}: {source}")]
    Open {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Terrain(#[from] TerrainError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
