use serde::{Deserialize, Serialize};

use super::NnError;

pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 10.0;

/// Diagonal Gaussian code `N(mean, exp(logvar))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCode {
    pub mean: Vec<f64>,
    pub logvar: Vec<f64>,
}

impl GaussianCode {
    pub fn new(mean: Vec<f64>, logvar: Vec<f64>) -> Result<Self, NnError> {
        if mean.len() != logvar.len() {
            return Err(NnError::LengthMismatch {
                expected: mean.len(),
                got: logvar.len(),
            });
        }
        let logvar = logvar.into_iter().map(clamp_logvar).collect();
        Ok(Self { mean, logvar })
    }

    /// Split a raw head output `[mean | logvar]` of even length.
    pub fn from_head(raw: &[f64]) -> Result<Self, NnError> {
        if raw.len() % 2 != 0 {
            return Err(NnError::LengthMismatch {
                expected: raw.len() + 1,
                got: raw.len(),
            });
        }
        let half = raw.len() / 2;
        Self::new(raw[..half].to_vec(), raw[half..].to_vec())
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self) -> Vec<f64> {
        self.logvar.iter().map(|l| l.exp()).collect()
    }
}

#[inline]
pub fn clamp_logvar(l: f64) -> f64 {
    l.clamp(LOGVAR_MIN, LOGVAR_MAX)
}

/// `mean + exp(logvar/2) ⊙ noise`.
pub fn reparameterize(code: &GaussianCode, noise: &[f64]) -> Result<Vec<f64>, NnError> {
    if noise.len() != code.mean.len() {
        return Err(NnError::LengthMismatch {
            expected: code.mean.len(),
            got: noise.len(),
        });
    }
    Ok(code
        .mean
        .iter()
        .zip(&code.logvar)
        .zip(noise)
        .map(|((m, l), n)| m + (0.5 * l).exp() * n)
        .collect())
}

/// `KL[N(mean, σ²) ‖ N(0, I)] = ½ Σ (μ² + σ² − 1 − ln σ²)`.
pub fn kl_to_standard_normal(code: &GaussianCode) -> f64 {
    0.5 * code
        .mean
        .iter()
        .zip(&code.logvar)
        .map(|(m, l)| m * m + l.exp() - 1.0 - l)
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn reparameterize_cases() {
        let c = GaussianCode::new(vec![0.5, -1.0], vec![1.3, -0.2]).unwrap();
        assert_eq!(reparameterize(&c, &[0.0, 0.0]).unwrap(), vec![0.5, -1.0]);
        let c = GaussianCode::new(vec![0.5, -1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(reparameterize(&c, &[0.25, 2.0]).unwrap(), vec![0.75, 1.0]);
        let ln2 = std::f64::consts::LN_2;
        let c = GaussianCode::new(vec![0.0, 0.0], vec![2.0 * ln2, 2.0 * ln2]).unwrap();
        let z = reparameterize(&c, &[1.0, -1.0]).unwrap();
        assert!((z[0] - 2.0).abs() < 1e-15 && (z[1] + 2.0).abs() < 1e-15);
        assert!(reparameterize(&c, &[1.0]).is_err());
    }

    #[test]
    fn kl_closed_forms() {
        let c = GaussianCode::new(vec![0.0; 4], vec![0.0; 4]).unwrap();
        assert_eq!(kl_to_standard_normal(&c), 0.0);
        let c = GaussianCode::new(vec![1.0], vec![0.0]).unwrap();
        assert_eq!(kl_to_standard_normal(&c), 0.5);
    }

    #[test]
    fn kl_matches_monte_carlo() {
        // KL = E_q[log q(z) − log p(z)], estimated with 10⁶ samples.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mean: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) * 0.15).collect();
        let logvar: Vec<f64> = (0..10).map(|i| (i as f64 - 5.0) * 0.12).collect();
        let code = GaussianCode::new(mean.clone(), logvar.clone()).unwrap();
        let exact = kl_to_standard_normal(&code);
        let n = 1_000_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let mut log_ratio = 0.0;
            for d in 0..10 {
                let eps: f64 = StandardNormal.sample(&mut rng);
                let sigma = (0.5 * logvar[d]).exp();
                let z = mean[d] + sigma * eps;
                // log q − log p with the 2π terms cancelled.
                log_ratio += -0.5 * eps * eps - 0.5 * logvar[d] + 0.5 * z * z;
            }
            sum += log_ratio;
            sum_sq += log_ratio * log_ratio;
        }
        let est = sum / n as f64;
        let var = sum_sq / n as f64 - est * est;
        let se = (var / n as f64).sqrt();
        assert!((est - exact).abs() < 3.0 * se, "mc {est} exact {exact} se {se}");
    }

    #[test]
    fn logvar_is_clamped() {
        let c = GaussianCode::new(vec![0.0, 0.0], vec![-50.0, 40.0]).unwrap();
        assert_eq!(c.logvar, vec![LOGVAR_MIN, LOGVAR_MAX]);
    }

    proptest! {
        #[test]
        fn zero_noise_is_identity(mean in prop::collection::vec(-5.0f64..5.0, 1..12), lv in -9.0f64..9.0) {
            let code = GaussianCode::new(mean.clone(), vec![lv; mean.len()]).unwrap();
            prop_assert_eq!(reparameterize(&code, &vec![0.0; mean.len()]).unwrap(), mean);
        }

        #[test]
        fn kl_zero_iff_standard(mean in prop::collection::vec(-2.0f64..2.0, 1..8), lv in prop::collection::vec(-2.0f64..2.0, 8)) {
            let lv = lv[..mean.len()].to_vec();
            let code = GaussianCode::new(mean.clone(), lv.clone()).unwrap();
            let kl = kl_to_standard_normal(&code);
            prop_assert!(kl >= 0.0);
            let standard = mean.iter().all(|m| m.abs() < 1e-7) && lv.iter().all(|l| l.abs() < 1e-5);
            if !standard {
                prop_assert!(kl > 1e-12);
            }
        }
    }
}
