//! Dense multilayer perceptron with explicit reverse-mode gradients.
//!
//! Weights are stored `[out × in]`; batched passes treat rows of the input
//! matrix as independent samples.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output `y = f(x)`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

/// Per-layer activations from a batched forward pass. `outputs[0]` is the
/// input batch, `outputs[i + 1]` the post-activation output of layer `i`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub outputs: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("cache holds at least the input")
    }
}

/// Gradients with the same layout as a [`DenseNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weight.raw_dim())).collect(),
            biases: net.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            w.mapv_inplace(|v| v * factor);
        }
        for b in &mut self.biases {
            b.mapv_inplace(|v| v * factor);
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| *v == 0.0))
            && self.biases.iter().all(|b| b.iter().all(|v| *v == 0.0))
    }
}

impl DenseNet {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::EmptyNetwork);
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(NnError::DimensionMismatch {
                    layer: i + 1,
                    expected: pair[0].out_dim(),
                    got: pair[1].in_dim(),
                });
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(NnError::DimensionMismatch {
                    layer: i,
                    expected: l.out_dim(),
                    got: l.bias.len(),
                });
            }
        }
        Ok(Self { layers })
    }

    /// Fully connected net over `sizes` (`sizes[0]` inputs). Hidden layers use
    /// `hidden`, the final layer is linear. Weights are uniform in
    /// ±√(6/(fan_in+fan_out)), biases zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "a network needs at least one layer");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight = Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-limit..=limit));
                let activation = if i + 1 == n { Activation::Identity } else { hidden };
                Layer {
                    weight,
                    bias: Array1::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn width(&self) -> usize {
        self.layers.iter().take(self.layers.len() - 1).map(Layer::out_dim).max().unwrap_or(0)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Zero the final layer so the net outputs its (zero) bias everywhere.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().expect("non-empty");
        last.weight.fill(0.0);
        last.bias.fill(0.0);
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("contiguous slice");
        let cache = self.forward_batch(x)?;
        Ok(cache.output().row(0).to_vec())
    }

    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<ForwardCache, NnError> {
        if input.ncols() != self.in_dim() {
            return Err(NnError::DimensionMismatch {
                layer: 0,
                expected: self.in_dim(),
                got: input.ncols(),
            });
        }
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(input.to_owned());
        for layer in &self.layers {
            let prev = outputs.last().expect("non-empty");
            let mut z = prev.dot(&layer.weight.t());
            z += &layer.bias;
            let act = layer.activation;
            if act != Activation::Identity {
                z.mapv_inplace(|v| act.apply(v));
            }
            outputs.push(z);
        }
        Ok(ForwardCache { outputs })
    }

    /// Reverse pass for a cached batch. Returns parameter gradients summed
    /// over the batch and, if requested, the gradient w.r.t. the input batch.
    pub fn backward_cached(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
        want_input_grad: bool,
    ) -> Result<(Gradients, Option<Array2<f64>>), NnError> {
        let out = cache.output();
        if upstream.dim() != out.dim() {
            return Err(NnError::ShapeMismatch {
                what: "upstream gradient",
                expected: out.dim(),
                got: upstream.dim(),
            });
        }
        let n = self.layers.len();
        let mut weights = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        let mut delta = upstream.to_owned();
        let mut input_grad = None;
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            let y = &cache.outputs[i + 1];
            if layer.activation != Activation::Identity {
                let act = layer.activation;
                ndarray::Zip::from(&mut delta)
                    .and(y)
                    .for_each(|d, &yv| *d *= act.derivative_from_output(yv));
            }
            let x = &cache.outputs[i];
            weights.push(delta.t().dot(x));
            biases.push(delta.sum_axis(Axis(0)));
            if i > 0 || want_input_grad {
                let next = delta.dot(&layer.weight);
                if i == 0 {
                    input_grad = Some(next);
                    break;
                }
                delta = next;
            }
        }
        weights.reverse();
        biases.reverse();
        Ok((Gradients { weights, biases }, input_grad))
    }

    /// Single-sample reverse pass: `(param_grads, input_grad)`.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<(Gradients, Vec<f64>), NnError> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("contiguous slice");
        let cache = self.forward_batch(x)?;
        if upstream.len() != self.out_dim() {
            return Err(NnError::ShapeMismatch {
                what: "upstream gradient",
                expected: (1, self.out_dim()),
                got: (1, upstream.len()),
            });
        }
        let up = ArrayView2::from_shape((1, upstream.len()), upstream).expect("contiguous slice");
        let (grads, input_grad) = self.backward_cached(&cache, up, true)?;
        Ok((grads, input_grad.expect("requested").row(0).to_vec()))
    }

    /// Parameters flattened layer by layer: weights row-major, then bias.
    pub fn params_to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    pub fn set_params_from_slice(&mut self, params: &[f64]) -> Result<(), NnError> {
        if params.len() != self.param_count() {
            return Err(NnError::ParamCount {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            for w in l.weight.iter_mut() {
                *w = params[offset];
                offset += 1;
            }
            for b in l.bias.iter_mut() {
                *b = params[offset];
                offset += 1;
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite()))
    }
}
