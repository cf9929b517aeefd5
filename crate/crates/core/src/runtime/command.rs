use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::RuntimeError;
use crate::oracle::{speed_limit, GaitKind, GaitParams};
use crate::terrain::GaitTiming;

/// Operator command applied at a tick boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitCommand {
    /// Forward, lateral velocity (m/s) and yaw rate (rad/s).
    pub a: [f64; 3],
    /// Gait selector: 1 trot, 0 crawl, −1 pace.
    pub g: f64,
    /// Phase increment per tick (rad).
    pub dphi: f64,
}

/// Stride period for a (possibly fractional) gait selector, interpolated
/// between the neighbouring presets.
pub fn stride_period(g: f64) -> f64 {
    let g = g.clamp(-1.0, 1.0);
    let crawl = GaitParams::preset(GaitKind::Crawl).stride_period;
    let other = if g >= 0.0 {
        GaitParams::preset(GaitKind::Trot).stride_period
    } else {
        GaitParams::preset(GaitKind::Pace).stride_period
    };
    crawl + g.abs() * (other - crawl)
}

/// Swing/stance durations matching [`stride_period`].
pub fn gait_timing(g: f64) -> GaitTiming {
    let swing = crate::oracle::SWING_DURATION;
    GaitTiming {
        swing,
        stance: (stride_period(g) - swing).max(0.0),
    }
}

/// Default cadence: one latent revolution per stride.
pub fn default_dphi(g: f64, rate_hz: f64) -> f64 {
    TAU / (stride_period(g) * rate_hz)
}

/// Speed limit for the gait region `g` lies in. Near the crawl midpoint
/// (|g| ≤ 0.25) the crawl limit applies.
pub fn velocity_limit(g: f64) -> f64 {
    if g.abs() <= 0.25 {
        speed_limit(GaitKind::Crawl)
    } else if g > 0.0 {
        speed_limit(GaitKind::Trot)
    } else {
        speed_limit(GaitKind::Pace)
    }
}

impl GaitCommand {
    pub fn new(a: [f64; 3], g: f64, rate_hz: f64) -> Self {
        Self {
            a,
            g: g.clamp(-1.0, 1.0),
            dphi: default_dphi(g, rate_hz),
        }
    }

    pub fn validate(&self) -> Result<Self, RuntimeError> {
        if !self.a.iter().all(|v| v.is_finite()) || !self.g.is_finite() || !self.dphi.is_finite() {
            return Err(RuntimeError::InvalidCommand("non-finite field".into()));
        }
        if self.dphi < 0.0 {
            return Err(RuntimeError::InvalidCommand(format!("dphi {} is negative", self.dphi)));
        }
        let limit = speed_limit(GaitKind::Trot);
        if self.a[0].hypot(self.a[1]) > limit + 1e-12 {
            return Err(RuntimeError::InvalidCommand(format!("speed exceeds {limit} m/s")));
        }
        Ok(Self {
            g: self.g.clamp(-1.0, 1.0),
            ..*self
        })
    }

    /// The velocity action with the gait-dependent limit applied.
    pub fn limited_action(&self) -> [f64; 3] {
        let limit = velocity_limit(self.g);
        let speed = self.a[0].hypot(self.a[1]);
        if speed <= limit {
            self.a
        } else {
            let s = limit / speed;
            [self.a[0] * s, self.a[1] * s, self.a[2]]
        }
    }
}

/// One piece of a command schedule. `g` ramps linearly to `g_end` (if set)
/// by the start of the next segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSegment {
    pub start: f64,
    pub a: [f64; 3],
    pub g: f64,
    #[serde(default)]
    pub g_end: Option<f64>,
    /// Fixed phase increment; the gait default when absent.
    #[serde(default)]
    pub dphi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandSchedule {
    pub segments: Vec<ScheduleSegment>,
}

impl CommandSchedule {
    pub fn constant(a: [f64; 3], g: f64) -> Self {
        Self {
            segments: vec![ScheduleSegment {
                start: 0.0,
                a,
                g,
                g_end: None,
                dphi: None,
            }],
        }
    }

    /// Hold `from`, ramp to `to`, hold `to`.
    pub fn ramp(a: [f64; 3], from: f64, to: f64, hold: f64, ramp: f64) -> Self {
        let seg = |start, g, g_end| ScheduleSegment {
            start,
            a,
            g,
            g_end,
            dphi: None,
        };
        Self {
            segments: vec![seg(0.0, from, None), seg(hold, from, Some(to)), seg(hold + ramp, to, None)],
        }
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        if self.segments.is_empty() {
            return Err(RuntimeError::InvalidCommand("schedule has no segments".into()));
        }
        if self.segments.windows(2).any(|w| !(w[1].start > w[0].start)) || self.segments[0].start != 0.0 {
            return Err(RuntimeError::InvalidCommand("segment starts must begin at 0 and increase".into()));
        }
        Ok(())
    }

    pub fn at(&self, t: f64, rate_hz: f64) -> GaitCommand {
        let i = self.segments.iter().rposition(|s| s.start <= t).unwrap_or(0);
        let seg = &self.segments[i];
        let g = match (seg.g_end, self.segments.get(i + 1)) {
            (Some(end), Some(next)) => {
                let u = ((t - seg.start) / (next.start - seg.start)).clamp(0.0, 1.0);
                seg.g + u * (end - seg.g)
            }
            (Some(end), None) => end,
            _ => seg.g,
        };
        let mut c = GaitCommand::new(seg.a, g, rate_hz);
        if let Some(d) = seg.dphi {
            c.dphi = d;
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cadence_interpolates() {
        assert!((stride_period(1.0) - 0.8).abs() < 1e-12);
        assert!((stride_period(0.0) - 1.44).abs() < 1e-12);
        assert!((stride_period(0.5) - 1.12).abs() < 1e-12);
        assert!((default_dphi(1.0, 400.0) - TAU / 320.0).abs() < 1e-15);
    }

    #[test]
    fn limits_near_crawl() {
        let c = GaitCommand::new([0.3, 0.0, 0.1], 0.2, 400.0);
        assert_eq!(c.limited_action(), [0.15, 0.0, 0.1]);
        let c = GaitCommand::new([0.3, 0.0, 0.0], 0.9, 400.0);
        assert_eq!(c.limited_action(), [0.3, 0.0, 0.0]);
        assert!(GaitCommand { dphi: -1.0, ..c }.validate().is_err());
        assert_eq!(GaitCommand { g: 3.0, ..c }.validate().unwrap().g, 1.0);
    }

    #[test]
    fn ramp_schedule() {
        let s = CommandSchedule::ramp([0.1, 0.0, 0.0], 1.0, -1.0, 3.0, 20.0);
        s.validate().unwrap();
        assert_eq!(s.at(1.0, 400.0).g, 1.0);
        assert!((s.at(13.0, 400.0).g - 0.0).abs() < 1e-12);
        assert_eq!(s.at(30.0, 400.0).g, -1.0);
    }
}
