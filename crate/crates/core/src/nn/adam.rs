use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{DenseNet, Gradients, NnError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators mirroring a [`DenseNet`]'s layout.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(net: &DenseNet, config: AdamConfig) -> Self {
        let zw = || net.layers().iter().map(|l| Array2::zeros(l.weight.raw_dim())).collect::<Vec<_>>();
        let zb = || net.layers().iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect::<Vec<_>>();
        Self {
            config,
            m_w: zw(),
            v_w: zw(),
            m_b: zb(),
            v_b: zb(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Bias-corrected Adam update applied in place.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<(), NnError> {
        if grads.weights.len() != net.depth() || self.m_w.len() != net.depth() {
            return Err(NnError::ShapeMismatch {
                what: "adam layer count",
                expected: (net.depth(), 0),
                got: (grads.weights.len(), 0),
            });
        }
        for (i, (w, b)) in grads.weights.iter().zip(&grads.biases).enumerate() {
            if w.dim() != net.layers()[i].weight.dim() || b.len() != net.layers()[i].bias.len() {
                return Err(NnError::ShapeMismatch {
                    what: "adam gradient",
                    expected: net.layers()[i].weight.dim(),
                    got: w.dim(),
                });
            }
            if !w.iter().chain(b.iter()).all(|v| v.is_finite()) {
                return Err(NnError::NonFiniteGradient { layer: i });
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        };
        for (i, layer) in net.layers_mut().iter_mut().enumerate() {
            ndarray::Zip::from(&mut layer.weight)
                .and(&grads.weights[i])
                .and(&mut self.m_w[i])
                .and(&mut self.v_w[i])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&grads.biases[i])
                .and(&mut self.m_b[i])
                .and(&mut self.v_b[i])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        Ok(())
    }
}
