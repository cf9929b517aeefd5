//! Raster of decoded behaviour over the planning plane.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::ContactClass;
use super::RuntimeError;
use crate::models::{ModelBundle, CONTACT_DIM};
use crate::oracle::{layout, STATE_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentMapSpec {
    /// Grid covers `[-extent, extent]` on both planning dims.
    pub extent: f64,
    pub resolution: usize,
    pub g: f64,
    pub a: [f64; 3],
    /// Terrain code held fixed over the grid.
    pub z_g: Vec<f64>,
}

impl LatentMapSpec {
    pub fn coordinate(&self, i: usize) -> f64 {
        if self.resolution < 2 {
            return 0.0;
        }
        -self.extent + 2.0 * self.extent * i as f64 / (self.resolution - 1) as f64
    }
}

/// Row `r` holds the second planning dim at [`LatentMapSpec::coordinate`]`(r)`,
/// column `c` the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentMap {
    pub spec: LatentMapSpec,
    pub dims: [usize; 2],
    /// [`ContactClass::index`] of the dominant decoded contact state.
    pub classes: Vec<u8>,
    /// Largest vertical foot excursion over the decoded horizon (m).
    pub swing_height: Vec<f64>,
    /// Largest fore-aft foot excursion over the decoded horizon (m).
    pub swing_length: Vec<f64>,
    /// Mean absolute joint change per decoded frame (rad).
    pub motion: Vec<f64>,
}

impl LatentMap {
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.spec.resolution + col
    }

    pub fn write(&self, path: &Path) -> Result<(), RuntimeError> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, RuntimeError> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// Fraction of cells whose dominant class differs.
    pub fn class_disagreement(&self, other: &LatentMap) -> f64 {
        let n = self.classes.len().min(other.classes.len());
        if n == 0 {
            return 0.0;
        }
        self.classes.iter().zip(&other.classes).filter(|(a, b)| a != b).count() as f64 / n as f64
    }
}

/// Decode every grid point with all non-planning dims at zero.
pub fn latent_slice_map(bundle: &ModelBundle, spec: &LatentMapSpec) -> Result<LatentMap, RuntimeError> {
    let dims = bundle.planning_dims()?;
    let c = bundle.config();
    let n = spec.resolution;
    let mut out = LatentMap {
        spec: spec.clone(),
        dims,
        classes: Vec::with_capacity(n * n),
        swing_height: Vec::with_capacity(n * n),
        swing_length: Vec::with_capacity(n * n),
        motion: Vec::with_capacity(n * n),
    };
    let mut z = vec![0.0; c.latent];
    for r in 0..n {
        for col in 0..n {
            z[dims[0]] = spec.coordinate(col);
            z[dims[1]] = spec.coordinate(r);
            let frames = bundle.vae.decode(&z, &spec.z_g, &spec.a, spec.g)?;
            let probs = bundle.vae.predict_contacts(&z, &spec.a, spec.g)?;
            let mut counts = [0usize; 7];
            for j in 0..c.horizon {
                let p = &probs[j * CONTACT_DIM..(j + 1) * CONTACT_DIM];
                counts[ContactClass::classify([p[0] > 0.5, p[1] > 0.5, p[2] > 0.5, p[3] > 0.5]).index() as usize] += 1;
            }
            let best = (0..7).fold(0, |b, i| if counts[i] > counts[b] { i } else { b });
            out.classes.push(best as u8);

            let (mut height, mut length) = (0.0f64, 0.0f64);
            for leg in 0..4 {
                let col_of = |axis: usize| (0..c.horizon).map(move |j| j * STATE_DIM + layout::EE + 3 * leg + axis);
                let range = |axis: usize| {
                    let (lo, hi) = col_of(axis).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| (lo.min(frames[i]), hi.max(frames[i])));
                    hi - lo
                };
                length = length.max(range(0));
                height = height.max(range(2));
            }
            out.swing_height.push(height);
            out.swing_length.push(length);
            let mut motion = 0.0;
            for j in 1..c.horizon {
                for q in 0..12 {
                    motion += (frames[j * STATE_DIM + layout::Q + q] - frames[(j - 1) * STATE_DIM + layout::Q + q]).abs();
                }
            }
            out.motion.push(motion / ((c.horizon.max(2) - 1) * 12) as f64);
        }
    }
    Ok(out)
}
