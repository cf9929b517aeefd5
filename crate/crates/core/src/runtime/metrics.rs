//! Swing, tracking and timing metrics over rollout windows.

use serde::{Deserialize, Serialize};

use super::RuntimeError;

/// Stance pattern of the four feet (LF, RF, LH, RH).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactClass {
    AllStance,
    /// LF + RH
    DiagonalA,
    /// RF + LH
    DiagonalB,
    /// LF + LH
    LateralLeft,
    /// RF + RH
    LateralRight,
    ThreeFeet,
    Other,
}

impl ContactClass {
    pub const ALL: [ContactClass; 7] = [
        ContactClass::AllStance,
        ContactClass::DiagonalA,
        ContactClass::DiagonalB,
        ContactClass::LateralLeft,
        ContactClass::LateralRight,
        ContactClass::ThreeFeet,
        ContactClass::Other,
    ];

    pub fn classify(c: [bool; 4]) -> Self {
        match c {
            [true, true, true, true] => ContactClass::AllStance,
            [true, false, false, true] => ContactClass::DiagonalA,
            [false, true, true, false] => ContactClass::DiagonalB,
            [true, false, true, false] => ContactClass::LateralLeft,
            [false, true, false, true] => ContactClass::LateralRight,
            _ if c.iter().filter(|&&b| b).count() == 3 => ContactClass::ThreeFeet,
            _ => ContactClass::Other,
        }
    }

    pub fn index(self) -> u8 {
        Self::ALL.iter().position(|&c| c == self).unwrap_or(6) as u8
    }

    pub fn from_index(i: u8) -> Option<Self> {
        Self::ALL.get(i as usize).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Swing {
    pub leg: usize,
    /// First and last swing tick (inclusive).
    pub start: usize,
    pub end: usize,
    /// Highest foot point above its liftoff height, base frame (m).
    pub apex: f64,
    /// Horizontal liftoff → touchdown displacement, base frame (m).
    pub length: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SwingMetrics {
    pub swings: Vec<Swing>,
    pub mean_apex: f64,
    pub mean_length: f64,
}

impl SwingMetrics {
    pub fn is_empty(&self) -> bool {
        self.swings.is_empty()
    }
}

/// Complete swing segments (contiguous non-contact runs bounded by stance on
/// both sides) in a window of base-frame foot positions.
pub fn swing_metrics(feet: &[[[f64; 3]; 4]], contacts: &[[bool; 4]], min_ticks: usize) -> Result<SwingMetrics, RuntimeError> {
    let n = feet.len().min(contacts.len());
    if n < min_ticks.max(2) {
        return Err(RuntimeError::WindowTooShort {
            need: min_ticks.max(2),
            got: n,
        });
    }
    let mut swings = Vec::new();
    for leg in 0..4 {
        let mut k = 1;
        while k < n {
            if contacts[k - 1][leg] && !contacts[k][leg] {
                let start = k;
                let mut end = k;
                while end + 1 < n && !contacts[end + 1][leg] {
                    end += 1;
                }
                if end + 1 >= n {
                    break;
                }
                let lift = feet[start - 1][leg];
                let land = feet[end + 1][leg];
                let top = (start..=end).map(|i| feet[i][leg][2]).fold(f64::NEG_INFINITY, f64::max);
                swings.push(Swing {
                    leg,
                    start,
                    end,
                    apex: (top - lift[2]).max(0.0),
                    length: (land[0] - lift[0]).hypot(land[1] - lift[1]),
                });
                k = end + 1;
            }
            k += 1;
        }
    }
    swings.sort_by_key(|s| (s.start, s.leg));
    let count = swings.len().max(1) as f64;
    Ok(SwingMetrics {
        mean_apex: swings.iter().map(|s| s.apex).sum::<f64>() / count,
        mean_length: swings.iter().map(|s| s.length).sum::<f64>() / count,
        swings,
    })
}

/// Joint RMSE over consecutive windows of `window` ticks (a trailing partial
/// window is dropped unless it is the only one).
pub fn joint_rmse(targets: &[[f64; 12]], executed: &[[f64; 12]], window: usize) -> Result<Vec<f64>, RuntimeError> {
    let n = targets.len().min(executed.len());
    if n == 0 || window == 0 {
        return Err(RuntimeError::WindowTooShort { need: window.max(1), got: n });
    }
    let rmse = |r: std::ops::Range<usize>| {
        let count = (r.len() * 12) as f64;
        let s: f64 = r.flat_map(|k| (0..12).map(move |j| (k, j))).map(|(k, j)| (targets[k][j] - executed[k][j]).powi(2)).sum();
        (s / count).sqrt()
    };
    if n < window {
        return Ok(vec![rmse(0..n)]);
    }
    Ok((0..n / window).map(|w| rmse(w * window..(w + 1) * window)).collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub ticks: usize,
    pub mean_us: f64,
    pub p50_us: u32,
    pub p99_us: u32,
    pub max_us: u32,
    pub overruns: usize,
    pub budget_us: u64,
}

impl TimingSummary {
    pub fn from_latencies(latencies: &[u32], budget_us: u64) -> Self {
        if latencies.is_empty() {
            return Self {
                budget_us,
                ..Self::default()
            };
        }
        let mut s = latencies.to_vec();
        s.sort_unstable();
        let pct = |p: f64| s[((p * (s.len() - 1) as f64).ceil() as usize).min(s.len() - 1)];
        Self {
            ticks: s.len(),
            mean_us: s.iter().map(|&v| v as f64).sum::<f64>() / s.len() as f64,
            p50_us: pct(0.5),
            p99_us: pct(0.99),
            max_us: s[s.len() - 1],
            overruns: s.iter().filter(|&&v| v as u64 > budget_us).count(),
            budget_us,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangular_swing_is_recovered() {
        // leg 0 lifts at tick 10, peaks 0.07 above liftoff at tick 20, lands at 30
        let mut feet = vec![[[0.3, 0.2, -0.48]; 4]; 50];
        let mut contacts = vec![[true; 4]; 50];
        for k in 10..30 {
            contacts[k][0] = false;
            let up = 0.07 * (1.0 - (k as f64 - 20.0).abs() / 10.0);
            feet[k][0] = [0.3 + 0.01 * (k - 9) as f64, 0.2, -0.48 + up];
        }
        for f in feet.iter_mut().skip(30) {
            f[0] = [0.5, 0.2, -0.48];
        }
        let m = swing_metrics(&feet, &contacts, 10).unwrap();
        assert_eq!(m.swings.len(), 1);
        assert!((m.swings[0].apex - 0.07).abs() < 1e-12);
        assert!((m.swings[0].length - 0.2).abs() < 1e-12);
    }

    #[test]
    fn all_stance_is_empty_and_short_window_errors() {
        let feet = vec![[[0.0; 3]; 4]; 100];
        let m = swing_metrics(&feet, &vec![[true; 4]; 100], 50).unwrap();
        assert!(m.is_empty());
        assert!(swing_metrics(&feet[..10], &vec![[true; 4]; 10], 50).is_err());
    }

    #[test]
    fn classes() {
        assert_eq!(ContactClass::classify([true, false, false, true]), ContactClass::DiagonalA);
        assert_eq!(ContactClass::classify([true, true, false, true]), ContactClass::ThreeFeet);
        assert_eq!(ContactClass::classify([false; 4]), ContactClass::Other);
        for c in ContactClass::ALL {
            assert_eq!(ContactClass::from_index(c.index()), Some(c));
        }
    }

    #[test]
    fn rmse_and_percentiles() {
        let t = vec![[0.1; 12]; 10];
        let e = vec![[0.0; 12]; 10];
        let r = joint_rmse(&t, &e, 5).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - 0.1).abs() < 1e-12);
        let s = TimingSummary::from_latencies(&(1..=100).collect::<Vec<_>>(), 50);
        assert_eq!((s.p50_us, s.p99_us, s.max_us, s.overruns), (51, 100, 100, 50));
    }
}
