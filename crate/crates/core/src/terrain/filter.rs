//! Unity-DC-gain second-order filter with exact zero-order-hold discretization.

use serde::{Deserialize, Serialize};

use super::TerrainError;

/// Continuous `ÿ = ωn²(u − y) − 2ζωn ẏ`, sampled at `dt` under zero-order hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LtiFilter {
    pub omega_n: f64,
    pub zeta: f64,
    pub dt: f64,
    ad: [[f64; 2]; 2],
    bd: [f64; 2],
    /// (position, velocity)
    pub state: [f64; 2],
}

/// Natural frequency giving a 0→100 % first-crossing rise time `rise_time`.
pub fn natural_frequency(rise_time: f64, zeta: f64) -> f64 {
    (std::f64::consts::PI - zeta.acos()) / (rise_time * (1.0 - zeta * zeta).sqrt())
}

/// Peak overshoot fraction of the step response.
pub fn overshoot(zeta: f64) -> f64 {
    (-zeta * std::f64::consts::PI / (1.0 - zeta * zeta).sqrt()).exp()
}

/// Time after which the step-response envelope `e^{-ζωn t}/√(1−ζ²)` is below `tol`.
pub fn settling_time(omega_n: f64, zeta: f64, tol: f64) -> f64 {
    -(tol * (1.0 - zeta * zeta).sqrt()).ln() / (zeta * omega_n)
}

pub fn design_filter(rise_time: f64, zeta: f64, dt: f64) -> Result<LtiFilter, TerrainError> {
    if !(rise_time > 0.0) || !(zeta > 0.0 && zeta < 1.0) || !(dt > 0.0) {
        return Err(TerrainError::InvalidFilter { rise_time, zeta, dt });
    }
    LtiFilter::new(natural_frequency(rise_time, zeta), zeta, dt)
}

impl LtiFilter {
    pub fn new(omega_n: f64, zeta: f64, dt: f64) -> Result<Self, TerrainError> {
        if !(omega_n > 0.0) || !(zeta > 0.0 && zeta < 1.0) || !(dt > 0.0) {
            return Err(TerrainError::InvalidFilter {
                rise_time: f64::NAN,
                zeta,
                dt,
            });
        }
        let sigma = zeta * omega_n;
        let wd = omega_n * (1.0 - zeta * zeta).sqrt();
        let e = (-sigma * dt).exp();
        let (s, c) = (wd * dt).sin_cos();
        let ad = [
            [e * (c + sigma / wd * s), e * s / wd],
            [-e * omega_n * omega_n / wd * s, e * (c - sigma / wd * s)],
        ];
        // ∫ e^{Aτ} dτ · B = (I − Ad)·[1, 0]ᵀ because A·[1, 0]ᵀ = −B.
        let bd = [1.0 - ad[0][0], -ad[1][0]];
        Ok(Self {
            omega_n,
            zeta,
            dt,
            ad,
            bd,
            state: [0.0; 2],
        })
    }

    pub fn output(&self) -> f64 {
        self.state[0]
    }

    pub fn reset(&mut self, value: f64) {
        self.state = [value, 0.0];
    }

    /// Advance one sample with input `u` held constant; returns the new output.
    pub fn step(&mut self, u: f64) -> Result<f64, TerrainError> {
        if !u.is_finite() {
            return Err(TerrainError::NonFiniteInput);
        }
        let [y, v] = self.state;
        self.state = [
            self.ad[0][0] * y + self.ad[0][1] * v + self.bd[0] * u,
            self.ad[1][0] * y + self.ad[1][1] * v + self.bd[1] * u,
        ];
        Ok(self.state[0])
    }
}
