use serde::{Deserialize, Serialize};

use super::ModelError;

/// Per-feature z-score. Features with (near) zero spread keep unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const MIN_STD: f64 = 1e-8;

/// Streaming (Welford) accumulator for [`Normalizer::fit`].
#[derive(Debug, Clone)]
pub struct NormalizerFit {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl NormalizerFit {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    /// Accumulate one or more consecutive rows.
    pub fn push(&mut self, rows: &[f64]) {
        let dim = self.mean.len();
        for chunk in rows.chunks_exact(dim) {
            self.n += 1;
            let n = self.n as f64;
            for j in 0..dim {
                let d = chunk[j] - self.mean[j];
                self.mean[j] += d / n;
                self.m2[j] += d * (chunk[j] - self.mean[j]);
            }
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn finish(self) -> Normalizer {
        let n = self.n;
        let std = self
            .m2
            .iter()
            .map(|v| {
                let s = if n > 1 { (v / (n - 1) as f64).sqrt() } else { 0.0 };
                if s > MIN_STD {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Normalizer { mean: self.mean, std }
    }
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Fit over rows of `dim` features given as one flat slice per chunk.
    pub fn fit<'a>(dim: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut acc = NormalizerFit::new(dim);
        for row in rows {
            acc.push(row);
        }
        acc.finish()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Normalize in place; `x` may hold several consecutive rows.
    pub fn apply(&self, x: &mut [f64]) -> Result<(), ModelError> {
        let d = self.dim();
        if x.len() % d != 0 {
            return Err(ModelError::Shape {
                what: "normalizer input",
                expected: d,
                got: x.len(),
            });
        }
        for row in x.chunks_exact_mut(d) {
            for j in 0..d {
                row[j] = (row[j] - self.mean[j]) / self.std[j];
            }
        }
        Ok(())
    }

    pub fn invert(&self, x: &mut [f64]) -> Result<(), ModelError> {
        let d = self.dim();
        if x.len() % d != 0 {
            return Err(ModelError::Shape {
                what: "normalizer input",
                expected: d,
                got: x.len(),
            });
        }
        for row in x.chunks_exact_mut(d) {
            for j in 0..d {
                row[j] = row[j] * self.std[j] + self.mean[j];
            }
        }
        Ok(())
    }
}
