//! Per-tick terrain pipeline: footholds → heights → control pitch → filter →
//! history. The same code runs in data generation, training replay and the
//! controller so all three see identical terrain inputs.

use serde::{Deserialize, Serialize};

use super::{
    control_pitch, design_filter, predict_footholds, ContactTimers, ControlPitch, GaitTiming, HeightMap, LtiFilter, TerrainError,
    TerrainInput, TerrainRing,
};
use crate::kinematics::{BasePose, QuadrupedGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerrainConfig {
    pub rise_time: f64,
    pub zeta: f64,
    pub rate_hz: f64,
    pub history: usize,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        Self {
            rise_time: 0.18,
            zeta: 0.5,
            rate_hz: 400.0,
            history: 80,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerrainTick {
    pub footholds: [[f64; 2]; 4],
    pub heights: [f64; 4],
    pub raw: ControlPitch,
    pub filtered: [f64; 2],
    /// Some foothold fell outside the map.
    pub clamped: bool,
}

#[derive(Debug, Clone)]
pub struct TerrainTracker {
    pub config: TerrainConfig,
    geometry: QuadrupedGeometry,
    filters: [LtiFilter; 2],
    timers: ContactTimers,
    ring: TerrainRing,
    last_raw: ControlPitch,
}

impl TerrainTracker {
    pub fn new(config: TerrainConfig, geometry: QuadrupedGeometry) -> Result<Self, TerrainError> {
        let f = design_filter(config.rise_time, config.zeta, 1.0 / config.rate_hz)?;
        Ok(Self {
            config,
            geometry,
            filters: [f, f],
            timers: ContactTimers::default(),
            ring: TerrainRing::new(config.history),
            last_raw: ControlPitch::default(),
        })
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.config.rate_hz
    }

    pub fn step(
        &mut self,
        map: &HeightMap,
        pose: &BasePose,
        command: &[f64; 3],
        contacts: [bool; 4],
        timing: &GaitTiming,
    ) -> Result<TerrainTick, TerrainError> {
        self.timers.update(contacts, self.dt());
        let footholds = predict_footholds(&self.geometry, pose, command, &self.timers, timing);
        let mut clamped = false;
        let heights = footholds.map(|f| {
            let s = map.sample_clamped(f[0], f[1]);
            clamped |= s.clamped;
            s.height
        });
        let raw = control_pitch(&heights);
        let filtered = [self.filters[0].step(raw.left)?, self.filters[1].step(raw.right)?];
        self.ring.push(filtered);
        self.last_raw = raw;
        Ok(TerrainTick {
            footholds,
            heights,
            raw,
            filtered,
            clamped,
        })
    }

    /// Set filter states and history to a settled `value`.
    pub fn warm_start(&mut self, value: [f64; 2]) {
        self.filters[0].reset(value[0]);
        self.filters[1].reset(value[1]);
        self.ring.warm_start(value);
        self.last_raw = ControlPitch {
            left: value[0],
            right: value[1],
        };
    }

    /// Warm start from the terrain under the hips of a level base at `xy`.
    pub fn warm_start_at(&mut self, map: &HeightMap, xy: [f64; 2], yaw: f64) {
        let pose = BasePose::from_xyz_rpy([xy[0], xy[1], self.geometry.nominal_height], 0.0, 0.0, yaw);
        let heights: [f64; 4] = std::array::from_fn(|i| {
            let hip = pose.to_world(&nalgebra::Vector3::from(self.geometry.legs[i].hip));
            map.sample_clamped(hip.x, hip.y).height
        });
        self.warm_start(control_pitch(&heights).as_array());
    }

    pub fn is_warm(&self) -> bool {
        self.ring.len() == self.ring.capacity()
    }

    pub fn input(&self) -> Result<TerrainInput, TerrainError> {
        super::build_terrain_input(&self.ring)
    }

    pub fn write_input(&self, out: &mut [f64]) -> Result<(), TerrainError> {
        self.ring.write_flat(out)
    }

    pub fn filtered(&self) -> [f64; 2] {
        [self.filters[0].output(), self.filters[1].output()]
    }

    /// Filter output `ticks` samples ahead if the current input is held.
    pub fn filtered_ahead(&self, ticks: usize) -> [f64; 2] {
        let mut f = self.filters;
        let u = self.last_raw.as_array();
        for _ in 0..ticks {
            for c in 0..2 {
                // Inputs were validated when they entered the pipeline.
                let _ = f[c].step(u[c]);
            }
        }
        [f[0].output(), f[1].output()]
    }

    pub fn timers(&self) -> &ContactTimers {
        &self.timers
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_ground_stays_zero() {
        let mut t = TerrainTracker::new(TerrainConfig::default(), QuadrupedGeometry::default()).unwrap();
        let map = HeightMap::flat();
        let timing = GaitTiming { swing: 0.36, stance: 0.44 };
        for k in 0..200 {
            let pose = BasePose::from_xyz_rpy([0.25 * k as f64 / 400.0, 0.0, 0.48], 0.0, 0.0, 0.0);
            let tick = t.step(&map, &pose, &[0.25, 0.0, 0.0], [k % 160 < 88; 4], &timing).unwrap();
            assert_eq!(tick.filtered, [0.0, 0.0]);
        }
        assert_eq!(t.input().unwrap(), TerrainInput::constant(80, [0.0, 0.0]));
    }

    #[test]
    fn approaching_step_raises_left_channel_first() {
        let mut t = TerrainTracker::new(TerrainConfig::default(), QuadrupedGeometry::default()).unwrap();
        let map = HeightMap::step(0.125, 1.0);
        let timing = GaitTiming { swing: 0.36, stance: 0.44 };
        let mut first_left = None;
        for k in 0..1600 {
            let x = 0.25 * k as f64 / 400.0;
            let pose = BasePose::from_xyz_rpy([x, 0.0, 0.48], 0.0, 0.0, 0.0);
            // trot-like contacts: LF+RH vs RF+LH
            let a = (k % 320) < 176;
            let b = ((k + 160) % 320) < 176;
            let tick = t.step(&map, &pose, &[0.25, 0.0, 0.0], [a, b, b, a], &timing).unwrap();
            if first_left.is_none() && tick.raw.left > 0.1 {
                first_left = Some(k);
            }
            assert!(tick.filtered[0] < 0.125 * 1.17 && tick.filtered[1] < 0.125 * 1.17);
        }
        assert!(first_left.is_some());
        let ahead = t.filtered_ahead(40);
        assert!(ahead.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn warm_start_fills_history() {
        let mut t = TerrainTracker::new(TerrainConfig::default(), QuadrupedGeometry::default()).unwrap();
        assert!(t.input().is_err());
        t.warm_start([0.01, 0.02]);
        assert!(t.is_warm());
        assert_eq!(t.filtered(), [0.01, 0.02]);
        assert_eq!(t.filtered_ahead(10), [0.01, 0.02]);
    }
}
