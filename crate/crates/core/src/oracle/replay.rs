use super::{Episode, OracleConfig, OracleError};
use crate::terrain::{HeightMap, TerrainTick, TerrainTracker};

/// Re-run the terrain pipeline over a recorded episode. Yields the same
/// per-frame foothold heights and filtered control pitch the generator saw.
pub fn replay_terrain(ep: &Episode, map: &HeightMap, cfg: &OracleConfig) -> Result<Vec<TerrainTick>, OracleError> {
    let mut tracker = TerrainTracker::new(cfg.terrain, cfg.geometry)?;
    tracker.warm_start_at(map, [0.0, 0.0], 0.0);
    let timing = ep.gait().timing();
    let poses = ep.poses(cfg.geometry.nominal_height);
    ep.frames
        .iter()
        .zip(&poses)
        .map(|(f, pose)| Ok(tracker.step(map, pose, &f.action, f.contacts, &timing)?))
        .collect()
}
