use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::TerrainError;

/// `N` stacked filtered control-pitch samples, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainInput {
    pub rows: Vec<[f64; 2]>,
}

impl TerrainInput {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row-major `N×2` flattening used as encoder input.
    pub fn flatten(&self) -> Vec<f64> {
        self.rows.iter().flat_map(|r| r.iter().copied()).collect()
    }

    pub fn constant(n: usize, value: [f64; 2]) -> Self {
        Self { rows: vec![value; n] }
    }
}

/// Fixed-capacity history of filtered samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainRing {
    capacity: usize,
    buf: VecDeque<[f64; 2]>,
}

impl TerrainRing {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            buf: VecDeque::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn push(&mut self, sample: [f64; 2]) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(sample);
    }

    /// Fill the buffer with `value` so inference can start immediately.
    pub fn warm_start(&mut self, value: [f64; 2]) {
        self.buf.clear();
        self.buf.extend(std::iter::repeat(value).take(self.capacity));
    }

    pub fn latest(&self) -> Option<[f64; 2]> {
        self.buf.back().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64; 2]> {
        self.buf.iter()
    }

    /// Write the row-major flattening into `out` (length `2·capacity`).
    pub fn write_flat(&self, out: &mut [f64]) -> Result<(), TerrainError> {
        if self.buf.len() < self.capacity {
            return Err(TerrainError::Underfilled {
                have: self.buf.len(),
                need: self.capacity,
            });
        }
        for (i, r) in self.buf.iter().enumerate() {
            out[2 * i] = r[0];
            out[2 * i + 1] = r[1];
        }
        Ok(())
    }
}

pub fn build_terrain_input(ring: &TerrainRing) -> Result<TerrainInput, TerrainError> {
    if ring.len() < ring.capacity() {
        return Err(TerrainError::Underfilled {
            have: ring.len(),
            need: ring.capacity(),
        });
    }
    Ok(TerrainInput {
        rows: ring.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_signal() {
        let mut r = TerrainRing::new(80);
        for _ in 0..100 {
            r.push([0.05, -0.02]);
        }
        let x = build_terrain_input(&r).unwrap();
        assert_eq!(x, TerrainInput::constant(80, [0.05, -0.02]));
        assert_eq!(x.flatten().len(), 160);
    }

    #[test]
    fn ramp_is_oldest_first() {
        let mut r = TerrainRing::new(5);
        for k in 0..12 {
            r.push([k as f64, -(k as f64)]);
        }
        let x = build_terrain_input(&r).unwrap();
        assert_eq!(x.rows.iter().map(|v| v[0]).collect::<Vec<_>>(), vec![7.0, 8.0, 9.0, 10.0, 11.0]);
        assert_eq!(x.flatten()[..4], [7.0, -7.0, 8.0, -8.0]);
    }

    #[test]
    fn underfilled_is_error() {
        let mut r = TerrainRing::new(4);
        r.push([0.0; 2]);
        assert!(matches!(build_terrain_input(&r), Err(TerrainError::Underfilled { have: 1, need: 4 })));
        r.warm_start([0.1, 0.2]);
        assert_eq!(build_terrain_input(&r).unwrap().len(), 4);
    }
}
