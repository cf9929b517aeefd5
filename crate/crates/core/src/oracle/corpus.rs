use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{generate_episode, CommandSchedule, CommandSegment, Episode, EpisodeSpec, GaitKind, GaitParams, OracleConfig, OracleError};
use crate::terrain::HeightMap;

const STEP_HEIGHTS: [f64; 3] = [0.075, 0.1, 0.125];
const STEP_EDGES: [f64; 2] = [1.0, 2.0];
const SEGMENT_SECONDS: f64 = 5.0;
/// Slowest flat-ground command as a share of the gait's speed limit.
const MIN_SPEED_SHARE: f64 = 0.3;

/// Highest forward speed commanded on flat ground.
pub fn speed_limit(kind: GaitKind) -> f64 {
    match kind {
        GaitKind::Trot => 0.4,
        GaitKind::Crawl => 0.15,
        GaitKind::Pace => 0.15,
    }
}

/// Forward speed used for climbing episodes.
pub fn climb_speed(kind: GaitKind) -> f64 {
    match kind {
        GaitKind::Trot => 0.25,
        GaitKind::Crawl => 0.12,
        GaitKind::Pace => 0.1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerrainMode {
    /// Trot and crawl alternate flat and step episodes; pace stays flat.
    Mixed,
    /// Every episode on the named terrain.
    Fixed(String),
}

impl TerrainMode {
    pub fn parse(s: &str) -> Self {
        if s == "mixed" {
            TerrainMode::Mixed
        } else {
            TerrainMode::Fixed(s.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusOptions {
    pub gaits: Vec<GaitKind>,
    pub minutes: f64,
    pub terrain: TerrainMode,
    pub seed: u64,
}

fn mix(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn flat_commands(rng: &mut ChaCha8Rng, kind: GaitKind, duration: f64) -> CommandSchedule {
    let n = (duration / SEGMENT_SECONDS).ceil().max(1.0) as usize;
    let segments = (0..n)
        .map(|i| {
            let limit = speed_limit(kind);
            let v = rng.gen_range(MIN_SPEED_SHARE * limit..=limit);
            CommandSegment {
                start: i as f64 * SEGMENT_SECONDS,
                command: [v, 0.0, 0.0],
            }
        })
        .collect();
    CommandSchedule { segments }
}

pub fn plan_corpus(opts: &CorpusOptions, cfg: &OracleConfig) -> Vec<EpisodeSpec> {
    let per_gait = ((opts.minutes * 60.0) / cfg.episode_seconds).ceil().max(1.0) as usize;
    let mut specs = Vec::new();
    for &kind in &opts.gaits {
        let gait = GaitParams {
            swing_height: cfg.swing_height,
            ..GaitParams::preset(kind)
        };
        let mut steps = 0usize;
        for i in 0..per_gait {
            let seed = mix(opts.seed, ((kind as u64) << 32) | i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let terrain_id = match &opts.terrain {
                TerrainMode::Fixed(t) => t.clone(),
                TerrainMode::Mixed if kind != GaitKind::Pace && i % 2 == 1 => {
                    let h = STEP_HEIGHTS[steps % STEP_HEIGHTS.len()];
                    let edge = STEP_EDGES[(steps / STEP_HEIGHTS.len()) % STEP_EDGES.len()];
                    steps += 1;
                    format!("step:{h},{edge}")
                }
                TerrainMode::Mixed => "flat".to_string(),
            };
            let flat = terrain_id == "flat";
            let (commands, amplitude) = if flat {
                let c = flat_commands(&mut rng, kind, cfg.episode_seconds);
                let [lo, hi] = cfg.amplitude_range;
                (c, rng.gen_range(lo..=hi))
            } else {
                (CommandSchedule::constant([climb_speed(kind), 0.0, 0.0]), 1.0)
            };
            let phase0 = rng.gen::<f64>();
            specs.push(EpisodeSpec {
                gait,
                terrain_id,
                commands,
                duration: cfg.episode_seconds,
                seed,
                amplitude,
                phase0: Some(phase0),
            });
        }
    }
    specs
}

/// Generate every planned episode, sharing height maps between episodes.
pub fn generate_corpus(specs: &[EpisodeSpec], cfg: &OracleConfig) -> Result<Vec<Episode>, OracleError> {
    let mut maps: HashMap<String, HeightMap> = HashMap::new();
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        if !maps.contains_key(&spec.terrain_id) {
            maps.insert(spec.terrain_id.clone(), HeightMap::resolve(&spec.terrain_id)?);
        }
        out.push(generate_episode(spec, &maps[&spec.terrain_id], cfg)?);
    }
    Ok(out)
}
