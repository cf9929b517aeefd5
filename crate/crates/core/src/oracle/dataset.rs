//! Newline-delimited JSON datasets: per episode one header record followed by
//! `D` frame records.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::episode::SCHEMA_VERSION;
use super::{Episode, EpisodeHeader, Frame, OracleError, RobotState};

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    q: [f64; 12],
    ee: [f64; 12],
    tau: [f64; 12],
    lambda: [f64; 4],
    cdot: [f64; 3],
    roll: f64,
    pitch: f64,
    dpose: [f64; 6],
    contacts: [bool; 4],
    foothold_h: [f64; 4],
    action: [f64; 3],
}

impl From<&Frame> for FrameRecord {
    fn from(f: &Frame) -> Self {
        let s = &f.state;
        Self {
            q: s.q,
            ee: s.ee,
            tau: s.tau,
            lambda: s.lambda,
            cdot: s.cdot,
            roll: s.roll,
            pitch: s.pitch,
            dpose: s.dpose,
            contacts: f.contacts,
            foothold_h: f.foothold_h,
            action: f.action,
        }
    }
}

impl From<FrameRecord> for Frame {
    fn from(r: FrameRecord) -> Self {
        Frame {
            state: RobotState {
                q: r.q,
                ee: r.ee,
                tau: r.tau,
                lambda: r.lambda,
                cdot: r.cdot,
                roll: r.roll,
                pitch: r.pitch,
                dpose: r.dpose,
            },
            contacts: r.contacts,
            foothold_h: r.foothold_h,
            action: r.action,
        }
    }
}

pub struct DatasetWriter<W: Write> {
    out: W,
    episodes: usize,
}

impl<W: Write> DatasetWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out, episodes: 0 }
    }

    pub fn write_episode(&mut self, ep: &Episode) -> Result<(), OracleError> {
        let mut header = ep.header.clone();
        header.length = ep.frames.len();
        serde_json::to_writer(&mut self.out, &header)?;
        self.out.write_all(b"\n")?;
        for f in &ep.frames {
            serde_json::to_writer(&mut self.out, &FrameRecord::from(f))?;
            self.out.write_all(b"\n")?;
        }
        self.episodes += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, OracleError> {
        self.out.flush()?;
        Ok(self.out)
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }
}

/// Streaming reader yielding one episode at a time.
pub struct DatasetReader<R: BufRead> {
    input: R,
    line: String,
    line_no: usize,
    episode: usize,
}

impl<R: BufRead> DatasetReader<R> {
    pub fn new(input: R) -> Self {
        Self {
            input,
            line: String::new(),
            line_no: 0,
            episode: 0,
        }
    }

    fn next_line(&mut self) -> Result<bool, OracleError> {
        self.line.clear();
        let n = self.input.read_line(&mut self.line)?;
        self.line_no += 1;
        Ok(n > 0)
    }

    fn read_episode(&mut self) -> Result<Option<Episode>, OracleError> {
        loop {
            if !self.next_line()? {
                return Ok(None);
            }
            if !self.line.trim().is_empty() {
                break;
            }
        }
        let header: EpisodeHeader = serde_json::from_str(&self.line).map_err(|e| OracleError::Parse {
            line: self.line_no,
            source: e,
        })?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(OracleError::SchemaVersion {
                found: header.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        let mut frames = Vec::with_capacity(header.length);
        for got in 0..header.length {
            if !self.next_line()? || self.line.trim().is_empty() {
                return Err(OracleError::Truncated {
                    episode: self.episode,
                    expected: header.length,
                    got,
                });
            }
            let rec: FrameRecord = serde_json::from_str(&self.line).map_err(|e| OracleError::Parse {
                line: self.line_no,
                source: e,
            })?;
            frames.push(Frame::from(rec));
        }
        self.episode += 1;
        Ok(Some(Episode { header, frames }))
    }
}

impl<R: BufRead> Iterator for DatasetReader<R> {
    type Item = Result<Episode, OracleError>;
    fn next(&mut self) -> Option<Self::Item> {
        self.read_episode().transpose()
    }
}

pub fn write_dataset<'a>(path: &Path, episodes: impl IntoIterator<Item = &'a Episode>) -> Result<usize, OracleError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = DatasetWriter::new(BufWriter::new(File::create(path)?));
    for ep in episodes {
        w.write_episode(ep)?;
    }
    let n = w.episodes();
    w.finish()?;
    Ok(n)
}

pub fn open_dataset(path: &Path) -> Result<DatasetReader<BufReader<File>>, OracleError> {
    let f = File::open(path).map_err(|e| OracleError::Open {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(DatasetReader::new(BufReader::with_capacity(1 << 20, f)))
}

pub fn read_dataset(path: &Path) -> Result<Vec<Episode>, OracleError> {
    open_dataset(path)?.collect()
}
