use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::terrain::GaitTiming;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaitKind {
    Trot,
    Crawl,
    Pace,
}

impl GaitKind {
    pub const ALL: [GaitKind; 3] = [GaitKind::Trot, GaitKind::Crawl, GaitKind::Pace];

    /// Decoder gait input: trot 1, crawl 0, pace −1.
    pub fn label(self) -> f64 {
        match self {
            GaitKind::Trot => 1.0,
            GaitKind::Crawl => 0.0,
            GaitKind::Pace => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GaitKind::Trot => "trot",
            GaitKind::Crawl => "crawl",
            GaitKind::Pace => "pace",
        }
    }

    /// Gait whose label is nearest to `g`.
    pub fn nearest(g: f64) -> Self {
        if g > 0.5 {
            GaitKind::Trot
        } else if g < -0.5 {
            GaitKind::Pace
        } else {
            GaitKind::Crawl
        }
    }
}

impl fmt::Display for GaitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GaitKind {
    type Err = OracleError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trot" => Ok(GaitKind::Trot),
            "crawl" => Ok(GaitKind::Crawl),
            "pace" => Ok(GaitKind::Pace),
            other => Err(OracleError::UnknownGait(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    pub kind: GaitKind,
    /// Per-leg phase offsets in stride fractions, order LF, RF, LH, RH.
    pub offsets: [f64; 4],
    pub duty: f64,
    pub stride_period: f64,
    pub swing_height: f64,
    /// Base-frame swing length per m/s of base velocity (s).
    pub swing_length_scale: f64,
}

pub const SWING_DURATION: f64 = 0.36;
pub const NOMINAL_SWING_HEIGHT: f64 = 0.083;

impl GaitParams {
    pub fn new(kind: GaitKind, offsets: [f64; 4], duty: f64, swing_duration: f64, swing_height: f64) -> Result<Self, OracleError> {
        if !(duty > 0.0 && duty < 1.0) {
            return Err(OracleError::InvalidGait(format!("duty factor {duty} outside (0, 1)")));
        }
        if !(swing_height > 0.0) || !(swing_duration > 0.0) {
            return Err(OracleError::InvalidGait("swing height and duration must be positive".into()));
        }
        if offsets.iter().any(|o| !(0.0..1.0).contains(o)) {
            return Err(OracleError::InvalidGait(format!("offsets {offsets:?} outside [0, 1)")));
        }
        let stride_period = swing_duration / (1.0 - duty);
        Ok(Self {
            kind,
            offsets,
            duty,
            stride_period,
            swing_height,
            swing_length_scale: duty * stride_period,
        })
    }

    pub fn preset(kind: GaitKind) -> Self {
        let (offsets, duty) = match kind {
            GaitKind::Trot => ([0.0, 0.5, 0.5, 0.0], 0.55),
            GaitKind::Pace => ([0.0, 0.5, 0.0, 0.5], 0.55),
            GaitKind::Crawl => ([0.0, 0.5, 0.75, 0.25], 0.75),
        };
        Self::new(kind, offsets, duty, SWING_DURATION, NOMINAL_SWING_HEIGHT).expect("preset gaits are valid")
    }

    pub fn swing_duration(&self) -> f64 {
        (1.0 - self.duty) * self.stride_period
    }

    pub fn stance_duration(&self) -> f64 {
        self.duty * self.stride_period
    }

    pub fn timing(&self) -> GaitTiming {
        GaitTiming {
            swing: self.swing_duration(),
            stance: self.stance_duration(),
        }
    }

    /// Leg-local cycle position in `[0, 1)`: stance on `[0, duty)`.
    pub fn leg_cycle(&self, leg: usize, phase: f64) -> f64 {
        (phase - self.offsets[leg]).rem_euclid(1.0)
    }

    /// Swing progress in `[0, 1)` or `None` in stance.
    pub fn swing_progress(&self, leg: usize, phase: f64) -> Option<f64> {
        let c = self.leg_cycle(leg, phase);
        (c >= self.duty).then(|| (c - self.duty) / (1.0 - self.duty))
    }
}

pub fn contact_schedule(gait: &GaitParams, phase: f64) -> [bool; 4] {
    std::array::from_fn(|i| gait.leg_cycle(i, phase) < gait.duty)
}

/// Foot displacement relative to liftoff: `(forward, height)`.
pub fn swing_profile(s: f64, height: f64, length: f64) -> (f64, f64) {
    let s = s.clamp(0.0, 1.0);
    let forward = length * (s - (2.0 * PI * s).sin() / (2.0 * PI));
    let up = height * 0.5 * (1.0 - (2.0 * PI * s).cos());
    (forward, up)
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Fraction of a liftoff→touchdown height change applied at swing progress
/// `s`: step-ups finish early in the swing, step-downs happen late.
pub fn level_blend(s: f64, rising: bool) -> f64 {
    if rising {
        smoothstep(s / 0.4)
    } else {
        smoothstep((s - 0.6) / 0.4)
    }
}
