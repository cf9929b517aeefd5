use std::f64::consts::PI;

use rand::Rng;

use super::{ModelConfig, ModelError};
use crate::nn::{Activation, DenseNet};

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerOutput {
    pub probs: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct PlannerModel {
    pub net: DenseNet,
    pub bins: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// `(R, φ)` with `φ = atan2(z0, z1)`.
pub fn to_polar(z0: f64, z1: f64) -> (f64, f64) {
    (z0.hypot(z1), z0.atan2(z1))
}

/// `(R sin φ, R cos φ)`
pub fn from_polar(radius: f64, phi: f64) -> (f64, f64) {
    let (s, c) = phi.sin_cos();
    (radius * s, radius * c)
}

/// Overwrite planning dims `(i, j)` of `z` with `(R sin φ, R cos φ)`.
pub fn latent_override(z: &mut [f64], dims: [usize; 2], radius: f64, phi: f64) -> Result<(), ModelError> {
    let [i, j] = dims;
    if i == j {
        return Err(ModelError::SamePlanningDims(i));
    }
    for d in dims {
        if d >= z.len() {
            return Err(ModelError::PlanningDimRange { dim: d, latent: z.len() });
        }
    }
    let (a, b) = from_polar(radius, phi);
    z[i] = a;
    z[j] = b;
    Ok(())
}

pub fn uniform_bins(count: usize, r_max: f64) -> Vec<f64> {
    (0..count).map(|c| r_max * c as f64 / (count - 1) as f64).collect()
}

impl PlannerModel {
    pub fn new<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let net = DenseNet::new(&[2 + cfg.latent, cfg.width, cfg.width, cfg.bins], Activation::Tanh, rng);
        Self {
            net,
            bins: uniform_bins(cfg.bins, cfg.r_max),
        }
    }

    pub fn from_parts(net: DenseNet, bins: Vec<f64>) -> Result<Self, ModelError> {
        if bins.len() < 2 || bins.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ModelError::InvalidBins);
        }
        if net.out_dim() != bins.len() {
            return Err(ModelError::Shape {
                what: "planner logits",
                expected: bins.len(),
                got: net.out_dim(),
            });
        }
        Ok(Self { net, bins })
    }

    pub fn input(phi: f64, z_g: &[f64]) -> Vec<f64> {
        let w = phi.rem_euclid(2.0 * PI);
        let mut x = Vec::with_capacity(2 + z_g.len());
        x.push(w.sin());
        x.push(w.cos());
        x.extend_from_slice(z_g);
        x
    }

    pub fn output_from_logits(&self, logits: &[f64]) -> PlannerOutput {
        let probs = softmax(logits);
        let radius = probs.iter().zip(&self.bins).map(|(p, b)| p * b).sum::<f64>();
        let radius = radius.clamp(self.bins[0], self.bins[self.bins.len() - 1]);
        PlannerOutput { probs, radius }
    }

    pub fn forward(&self, phi: f64, z_g: &[f64]) -> Result<PlannerOutput, ModelError> {
        let expected = self.net.in_dim() - 2;
        if z_g.len() != expected {
            return Err(ModelError::Shape {
                what: "planner terrain code",
                expected,
                got: z_g.len(),
            });
        }
        let logits = self.net.forward(&Self::input(phi, z_g))?;
        Ok(self.output_from_logits(&logits))
    }

    /// Index of the bin nearest to `radius`.
    pub fn nearest_bin(&self, radius: f64) -> usize {
        let mut best = 0;
        for (c, b) in self.bins.iter().enumerate() {
            if (b - radius).abs() < (self.bins[best] - radius).abs() {
                best = c;
            }
        }
        best
    }
}
