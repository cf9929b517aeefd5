//! Finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::NnError;

/// Outcome of a gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

/// Compare `analytic` against central differences of `loss_fn` around
/// `params`. At most `max_coords` coordinates are probed (sampled with a
/// fixed seed). The error per coordinate is
/// `|a − d| / (|a| + |d| + 1e−12)`.
pub fn gradient_check<F>(
    mut loss_fn: F,
    params: &[f64],
    analytic: &[f64],
    eps: f64,
    max_coords: usize,
) -> Result<GradCheckReport, NnError>
where
    F: FnMut(&[f64]) -> f64,
{
    if params.len() != analytic.len() {
        return Err(NnError::LengthMismatch {
            expected: params.len(),
            got: analytic.len(),
        });
    }
    let coords: Vec<usize> = if params.len() <= max_coords {
        (0..params.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
        let mut idx = sample(&mut rng, params.len(), max_coords).into_vec();
        idx.sort_unstable();
        idx
    };
    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: 0,
        checked: coords.len(),
    };
    for &i in &coords {
        let orig = probe[i];
        probe[i] = orig + eps;
        let fp = loss_fn(&probe);
        probe[i] = orig - eps;
        let fm = loss_fn(&probe);
        probe[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(NnError::NonFiniteLoss { index: i });
        }
        let diff = (fp - fm) / (2.0 * eps);
        let rel = (analytic[i] - diff).abs() / (analytic[i].abs() + diff.abs() + 1e-12);
        if rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst_index = i;
        }
    }
    Ok(report)
}
