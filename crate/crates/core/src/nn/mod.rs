//! Dense-network substrate shared by every learned head: parameters,
//! forward/backward passes, Adam, Gaussian codes, gradient checks and
//! weight persistence.

mod adam;
mod dense;
mod frozen;
mod gaussian;
mod gradcheck;
pub mod persist;

pub use adam::{AdamConfig, AdamState};
pub use dense::{Activation, DenseNet, ForwardCache, Gradients, Layer};
pub use frozen::{num_traits_lite::Real, FrozenNet};
pub use gaussian::{clamp_logvar, kl_to_standard_normal, reparameterize, GaussianCode, LOGVAR_MAX, LOGVAR_MIN};
pub use gradcheck::{gradient_check, GradCheckReport};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("dimension mismatch at layer {layer}: expected {expected}, got {got}")]
    DimensionMismatch { layer: usize, expected: usize, got: usize },
    #[error("{what} shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("parameter count mismatch: expected {expected}, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },
    #[error("non-finite loss while probing coordinate {index}")]
    NonFiniteLoss { index: usize },
    #[error("network has no layers")]
    EmptyNetwork,
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
