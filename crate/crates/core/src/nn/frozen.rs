//! Allocation-free inference copies of trained networks.

use num_traits_lite::Real;

use super::{Activation, DenseNet, NnError};

/// Minimal float abstraction so the deployed path can run in `f32` or `f64`.
pub mod num_traits_lite {
    pub trait Real: Copy + Default + Send + Sync + std::fmt::Debug + 'static {
        fn from_f64(v: f64) -> Self;
        fn to_f64(self) -> f64;
        fn tanh(self) -> Self;
        fn relu(self) -> Self;
        fn mul_add_acc(acc: Self, a: Self, b: Self) -> Self;
        fn add(self, o: Self) -> Self;
    }

    macro_rules! impl_real {
        ($t:ty) => {
            impl Real for $t {
                #[inline]
                fn from_f64(v: f64) -> Self {
                    v as $t
                }
                #[inline]
                fn to_f64(self) -> f64 {
                    self as f64
                }
                #[inline]
                fn tanh(self) -> Self {
                    <$t>::tanh(self)
                }
                #[inline]
                fn relu(self) -> Self {
                    self.max(0.0)
                }
                #[inline]
                fn mul_add_acc(acc: Self, a: Self, b: Self) -> Self {
                    acc + a * b
                }
                #[inline]
                fn add(self, o: Self) -> Self {
                    self + o
                }
            }
        };
    }
    impl_real!(f32);
    impl_real!(f64);
}

#[derive(Debug, Clone)]
struct FrozenLayer<T> {
    input: usize,
    output: usize,
    weight: Vec<T>,
    bias: Vec<T>,
    activation: Activation,
}

/// Row-major copy of a [`DenseNet`] with preallocated scratch buffers.
#[derive(Debug, Clone)]
pub struct FrozenNet<T: Real> {
    layers: Vec<FrozenLayer<T>>,
    scratch: [Vec<T>; 2],
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    // Eight independent accumulators so the loop vectorizes.
    let mut acc = [T::default(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for k in 0..8 {
            acc[k] = T::mul_add_acc(acc[k], x[k], y[k]);
        }
    }
    let mut total = T::default();
    for v in acc {
        total = total.add(v);
    }
    for i in chunks * 8..a.len() {
        total = T::mul_add_acc(total, a[i], b[i]);
    }
    total
}

impl<T: Real> FrozenNet<T> {
    pub fn from_net(net: &DenseNet) -> Self {
        let layers: Vec<_> = net
            .layers()
            .iter()
            .map(|l| FrozenLayer {
                input: l.in_dim(),
                output: l.out_dim(),
                weight: l.weight.iter().map(|v| T::from_f64(*v)).collect(),
                bias: l.bias.iter().map(|v| T::from_f64(*v)).collect(),
                activation: l.activation,
            })
            .collect();
        let widest = layers.iter().map(|l| l.output.max(l.input)).max().unwrap_or(0);
        Self {
            layers,
            scratch: [vec![T::default(); widest], vec![T::default(); widest]],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output
    }

    /// Forward pass into `out`; no heap allocation.
    pub fn forward_into(&mut self, input: &[T], out: &mut [T]) -> Result<(), NnError> {
        if input.len() != self.in_dim() {
            return Err(NnError::DimensionMismatch {
                layer: 0,
                expected: self.in_dim(),
                got: input.len(),
            });
        }
        if out.len() != self.out_dim() {
            return Err(NnError::LengthMismatch {
                expected: self.out_dim(),
                got: out.len(),
            });
        }
        let n = self.layers.len();
        let mut cur = std::mem::take(&mut self.scratch[0]);
        let mut next = std::mem::take(&mut self.scratch[1]);
        for (i, layer) in self.layers.iter().enumerate() {
            let src: &[T] = if i == 0 { input } else { &cur[..layer.input] };
            let dst: &mut [T] = if i + 1 == n { &mut *out } else { &mut next[..layer.output] };
            for (o, d) in dst.iter_mut().enumerate() {
                let row = &layer.weight[o * layer.input..(o + 1) * layer.input];
                let z = dot(row, src).add(layer.bias[o]);
                *d = match layer.activation {
                    Activation::Tanh => z.tanh(),
                    Activation::Relu => z.relu(),
                    Activation::Identity => z,
                };
            }
            if i + 1 < n {
                std::mem::swap(&mut cur, &mut next);
            }
        }
        self.scratch = [cur, next];
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_training_net() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = DenseNet::new(&[37, 19, 23, 5], Activation::Tanh, &mut rng);
        let x: Vec<f64> = (0..37).map(|i| (i as f64 * 0.37).sin()).collect();
        let want = net.forward(&x).unwrap();
        let mut f64net = FrozenNet::<f64>::from_net(&net);
        let mut out = vec![0.0; 5];
        f64net.forward_into(&x, &mut out).unwrap();
        for (a, b) in want.iter().zip(&out) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut f32net = FrozenNet::<f32>::from_net(&net);
        let x32: Vec<f32> = x.iter().map(|v| *v as f32).collect();
        let mut out32 = vec![0.0f32; 5];
        f32net.forward_into(&x32, &mut out32).unwrap();
        for (a, b) in want.iter().zip(&out32) {
            assert!((a - *b as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn single_and_deep_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for sizes in [vec![3, 2], vec![4, 6, 6, 6, 6, 3]] {
            let net = DenseNet::new(&sizes, Activation::Relu, &mut rng);
            let x = vec![0.3; sizes[0]];
            let want = net.forward(&x).unwrap();
            let mut f = FrozenNet::<f64>::from_net(&net);
            let mut out = vec![0.0; *sizes.last().unwrap()];
            f.forward_into(&x, &mut out).unwrap();
            for (a, b) in want.iter().zip(&out) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_wrong_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let net = DenseNet::new(&[3, 2], Activation::Relu, &mut rng);
        let mut f = FrozenNet::<f32>::from_net(&net);
        let mut out = [0.0f32; 2];
        assert!(f.forward_into(&[1.0, 2.0], &mut out).is_err());
    }
}
