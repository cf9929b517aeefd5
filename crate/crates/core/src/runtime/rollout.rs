//! Closed-loop rollouts and their newline-delimited logs.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::command::CommandSchedule;
use super::controller::Controller;
use super::metrics::TimingSummary;
use super::{RuntimeConfig, RuntimeError};
use crate::models::ModelBundle;
use crate::oracle::{climb_speed, GaitKind};
use crate::terrain::HeightMap;

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Trot on flat ground.
    Flat,
    /// Trot over a step of the given height, edge 1 m ahead.
    Step(f64),
    /// Gait sweep trot → pace on flat ground.
    Transition,
    /// Schedule file (see [`ScenarioFile`]).
    File(PathBuf),
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(default = "flat_name")]
    pub terrain: String,
    pub duration: f64,
    pub schedule: CommandSchedule,
}

fn flat_name() -> String {
    "flat".into()
}

impl Scenario {
    pub fn parse(s: &str) -> Result<Self, RuntimeError> {
        match s {
            "flat" => Ok(Scenario::Flat),
            "transition" => Ok(Scenario::Transition),
            _ => {
                if let Some(h) = s.strip_prefix("step:") {
                    return h.parse().map(Scenario::Step).map_err(|_| RuntimeError::UnknownScenario(s.into()));
                }
                let p = Path::new(s);
                if p.is_file() {
                    Ok(Scenario::File(p.to_path_buf()))
                } else {
                    Err(RuntimeError::UnknownScenario(s.into()))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Scenario::Flat => "flat".into(),
            Scenario::Step(h) => format!("step:{h}"),
            Scenario::Transition => "transition".into(),
            Scenario::File(p) => p.display().to_string(),
        }
    }

    /// Terrain id, command schedule and default duration.
    pub fn plan(&self) -> Result<ScenarioFile, RuntimeError> {
        let trot = climb_speed(GaitKind::Trot);
        Ok(match self {
            Scenario::Flat => ScenarioFile {
                terrain: "flat".into(),
                duration: 5.0,
                schedule: CommandSchedule::constant([trot, 0.0, 0.0], 1.0),
            },
            Scenario::Step(h) => ScenarioFile {
                terrain: format!("step:{h}"),
                duration: 12.0,
                schedule: CommandSchedule::constant([trot, 0.0, 0.0], 1.0),
            },
            Scenario::Transition => ScenarioFile {
                terrain: "flat".into(),
                duration: 26.0,
                schedule: CommandSchedule::ramp([0.1, 0.0, 0.0], 1.0, -1.0, 3.0, 20.0),
            },
            Scenario::File(p) => {
                let f: ScenarioFile = serde_json::from_slice(&std::fs::read(p)?)?;
                f.schedule.validate()?;
                f
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutOptions {
    /// Overrides the scenario's duration (s).
    pub duration: Option<f64>,
    pub seed: u64,
    /// Write per-tick latencies into the log (makes logs timing-dependent).
    pub record_latency: bool,
    pub runtime: RuntimeConfig,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        Self {
            duration: None,
            seed: 0,
            record_latency: false,
            runtime: RuntimeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub scenario: String,
    pub terrain: String,
    pub duration: f64,
    pub rate_hz: f64,
    pub seed: u64,
    pub planning_dims: [usize; 2],
    pub schedule: CommandSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub t: f64,
    pub phi: f64,
    pub dphi: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub z_plan: [f64; 2],
    pub g: f64,
    pub a: [f64; 3],
    pub targets: [f64; 12],
    /// Executed joints.
    pub q: [f64; 12],
    pub contact_probs: [f64; 4],
    pub contacts: [bool; 4],
    pub position: [f64; 3],
    pub rpy: [f64; 3],
    /// Executed feet, base frame.
    pub feet: [[f64; 3]; 4],
    pub filtered: [f64; 2],
    pub pitch: f64,
    pub ballistic: bool,
    pub slip: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_us: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages_us: Option<[u32; 9]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub header: LogHeader,
    pub records: Vec<TickRecord>,
    pub timing: TimingSummary,
    /// Stage error that ended the rollout early, if any.
    pub error: Option<String>,
}

/// Run the scenario closed-loop. Setup failures are errors; a failing tick
/// ends the run and is reported in [`Rollout::error`] with the partial log.
pub fn rollout(bundle: &ModelBundle, scenario: &Scenario, opts: &RolloutOptions) -> Result<Rollout, RuntimeError> {
    let plan = scenario.plan()?;
    let map = HeightMap::resolve(&plan.terrain)?;
    let rate = bundle.config().control_hz;
    let duration = opts.duration.unwrap_or(plan.duration);
    let mut controller = Controller::new(bundle, map, opts.runtime.clone(), plan.schedule.at(0.0, rate), opts.seed)?;
    let ticks = (duration * rate).round() as usize;
    let header = LogHeader {
        scenario: scenario.name(),
        terrain: plan.terrain.clone(),
        duration,
        rate_hz: rate,
        seed: opts.seed,
        planning_dims: controller.models().dims,
        schedule: plan.schedule.clone(),
    };
    let mut records = Vec::with_capacity(ticks);
    let mut latencies = Vec::with_capacity(ticks);
    let mut error = None;
    for k in 0..ticks {
        let t = k as f64 / rate;
        let cmd = plan.schedule.at(t, rate);
        let start = Instant::now();
        let out = match controller.step(cmd) {
            Ok(o) => o,
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        };
        let us = start.elapsed().as_micros().min(u32::MAX as u128) as u32;
        latencies.push(us);
        let pose = &out.tracked.pose;
        let (roll, pitch, yaw) = pose.rpy();
        let s = &out.tracked.state;
        records.push(TickRecord {
            tick: out.tick.tick,
            t,
            phi: out.tick.phi,
            dphi: out.tick.dphi,
            radius: out.tick.radius,
            z_plan: out.tick.z_plan,
            g: out.tick.g,
            a: out.tick.action,
            targets: out.tick.targets,
            q: s.q,
            contact_probs: out.tick.contact_probs,
            contacts: out.contacts,
            position: pose.position.into(),
            rpy: [roll, pitch, yaw],
            feet: std::array::from_fn(|leg| [s.ee[3 * leg], s.ee[3 * leg + 1], s.ee[3 * leg + 2]]),
            filtered: out.tick.filtered,
            pitch: out.tick.pitch,
            ballistic: out.tracked.ballistic,
            slip: out.tracked.slip,
            latency_us: opts.record_latency.then_some(us),
            stages_us: opts.record_latency.then_some(out.tick.latency.stages_us),
        });
    }
    Ok(Rollout {
        header,
        records,
        timing: TimingSummary::from_latencies(&latencies, opts.runtime.budget_us),
        error,
    })
}

pub fn write_log(path: &Path, header: &LogHeader, records: &[TickRecord]) -> Result<(), RuntimeError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log(path: &Path) -> Result<(LogHeader, Vec<TickRecord>), RuntimeError> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut lines = r.lines().enumerate();
    let bad = |line: usize, e: &dyn std::fmt::Display| RuntimeError::Log {
        line: line + 1,
        message: e.to_string(),
    };
    let header: LogHeader = match lines.next() {
        Some((i, l)) => serde_json::from_str(&l?).map_err(|e| bad(i, &e))?,
        None => return Err(bad(0, &"empty log")),
    };
    let mut records = Vec::new();
    for (i, l) in lines {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&l).map_err(|e| bad(i, &e))?);
    }
    Ok((header, records))
}
