use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TerrainError;

/// Regular 2.5D grid of terrain heights. Cell `(row, col)` is centred at
/// `origin + (col, row) · resolution`; rows run along y, columns along x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightMap {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub rows: usize,
    pub cols: usize,
    pub heights: Vec<f64>,
}

/// Height query result; `clamped` marks queries outside the grid that were
/// answered from the nearest edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightSample {
    pub height: f64,
    pub clamped: bool,
}

const DEFAULT_EXTENT_X: (f64, f64) = (-2.0, 14.0);
const DEFAULT_EXTENT_Y: (f64, f64) = (-2.0, 2.0);
const DEFAULT_RESOLUTION: f64 = 0.02;
pub const DEFAULT_STEP_EDGE: f64 = 1.0;

impl HeightMap {
    pub fn new(origin: [f64; 2], resolution: f64, rows: usize, cols: usize, heights: Vec<f64>) -> Result<Self, TerrainError> {
        let map = Self {
            origin,
            resolution,
            rows,
            cols,
            heights,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<(), TerrainError> {
        if !(self.resolution > 0.0) || !self.resolution.is_finite() {
            return Err(TerrainError::InvalidMap(format!("resolution {} must be positive", self.resolution)));
        }
        if self.rows < 2 || self.cols < 2 {
            return Err(TerrainError::InvalidMap("grid needs at least 2×2 cells".into()));
        }
        if self.heights.len() != self.rows * self.cols {
            return Err(TerrainError::InvalidMap(format!(
                "{} heights for {}×{} grid",
                self.heights.len(),
                self.rows,
                self.cols
            )));
        }
        if !self.heights.iter().all(|h| h.is_finite()) {
            return Err(TerrainError::InvalidMap("non-finite height".into()));
        }
        Ok(())
    }

    /// Grid over the default extent filled by `f(x, y)`.
    pub fn from_fn(f: impl Fn(f64, f64) -> f64) -> Self {
        let res = DEFAULT_RESOLUTION;
        let cols = ((DEFAULT_EXTENT_X.1 - DEFAULT_EXTENT_X.0) / res).round() as usize + 1;
        let rows = ((DEFAULT_EXTENT_Y.1 - DEFAULT_EXTENT_Y.0) / res).round() as usize + 1;
        let origin = [DEFAULT_EXTENT_X.0, DEFAULT_EXTENT_Y.0];
        let mut heights = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                heights.push(f(origin[0] + c as f64 * res, origin[1] + r as f64 * res));
            }
        }
        Self {
            origin,
            resolution: res,
            rows,
            cols,
            heights,
        }
    }

    pub fn flat() -> Self {
        Self::from_fn(|_, _| 0.0)
    }

    /// Platform of height `h` for all `x ≥ edge`.
    pub fn step(h: f64, edge: f64) -> Self {
        Self::from_fn(|x, _| if x >= edge - 1e-9 { h } else { 0.0 })
    }

    /// `n` ascending steps of rise `h` and tread `w`, first edge at 1 m.
    pub fn stairs(h: f64, w: f64, n: usize) -> Self {
        Self::from_fn(|x, _| {
            let k = ((x - DEFAULT_STEP_EDGE) / w + 1e-9).floor();
            if k < 0.0 {
                0.0
            } else {
                h * (k + 1.0).min(n as f64)
            }
        })
    }

    /// Parse a built-in terrain name: `flat`, `step:h[,edge]`, `stairs:h,w,n`.
    pub fn builtin(name: &str) -> Result<Self, TerrainError> {
        let bad = || TerrainError::UnknownTerrain(name.to_string());
        let nums = |s: &str| -> Result<Vec<f64>, TerrainError> {
            s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect()
        };
        if name == "flat" {
            return Ok(Self::flat());
        }
        if let Some(rest) = name.strip_prefix("step:") {
            let v = nums(rest)?;
            return match v.as_slice() {
                [h] => Ok(Self::step(*h, DEFAULT_STEP_EDGE)),
                [h, edge] => Ok(Self::step(*h, *edge)),
                _ => Err(bad()),
            };
        }
        if let Some(rest) = name.strip_prefix("stairs:") {
            let v = nums(rest)?;
            return match v.as_slice() {
                [h, w, n] if *w > 0.0 && *n >= 1.0 => Ok(Self::stairs(*h, *w, *n as usize)),
                _ => Err(bad()),
            };
        }
        Err(bad())
    }

    /// A built-in name, or else a path to a JSON height-map file.
    pub fn resolve(spec: &str) -> Result<Self, TerrainError> {
        match Self::builtin(spec) {
            Ok(m) => Ok(m),
            Err(e) => {
                let p = Path::new(spec);
                if p.exists() {
                    Self::read(p)
                } else {
                    Err(e)
                }
            }
        }
    }

    pub fn read(path: &Path) -> Result<Self, TerrainError> {
        let map: HeightMap = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        map.validate()?;
        Ok(map)
    }

    pub fn write(&self, path: &Path) -> Result<(), TerrainError> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn cell(&self, row: usize, col: usize) -> f64 {
        self.heights[row * self.cols + col]
    }

    /// Bilinear interpolation; out-of-bounds queries are an error carrying the
    /// clamped-edge answer.
    pub fn sample(&self, x: f64, y: f64) -> Result<f64, TerrainError> {
        let s = self.sample_clamped(x, y);
        if s.clamped {
            Err(TerrainError::OutOfBounds {
                x,
                y,
                clamped_height: s.height,
            })
        } else {
            Ok(s.height)
        }
    }

    pub fn sample_clamped(&self, x: f64, y: f64) -> HeightSample {
        let fx = (x - self.origin[0]) / self.resolution;
        let fy = (y - self.origin[1]) / self.resolution;
        let max_c = (self.cols - 1) as f64;
        let max_r = (self.rows - 1) as f64;
        let clamped = !(0.0..=max_c).contains(&fx) || !(0.0..=max_r).contains(&fy) || !fx.is_finite() || !fy.is_finite();
        let fx = if fx.is_finite() { fx.clamp(0.0, max_c) } else { 0.0 };
        let fy = if fy.is_finite() { fy.clamp(0.0, max_r) } else { 0.0 };
        let c0 = (fx.floor() as usize).min(self.cols - 2);
        let r0 = (fy.floor() as usize).min(self.rows - 2);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let h00 = self.cell(r0, c0);
        let h01 = self.cell(r0, c0 + 1);
        let h10 = self.cell(r0 + 1, c0);
        let h11 = self.cell(r0 + 1, c0 + 1);
        let height = (1.0 - ty) * ((1.0 - tx) * h00 + tx * h01) + ty * ((1.0 - tx) * h10 + tx * h11);
        HeightSample { height, clamped }
    }
}
