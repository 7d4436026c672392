//! Replayable session capture: configuration, scene, every command with the
//! tick it entered the loop, and every frame.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TelemetryFrame;
use crate::actuation::ContactEvent;
use crate::config::Config;
use crate::sim::{RecordedCommand, SceneSetup, SimError, Simulation};

pub const RECORD_FORMAT: &str = "aerotwin-session";
pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("corrupt record: {0}")]
    Corrupt(String),
    #[error("replay failed: {0}")]
    Replay(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexedEvent {
    /// Position of the carrying frame in `frames`.
    pub frame: usize,
    pub event: ContactEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub format: String,
    pub version: u32,
    pub config: Config,
    pub scene: SceneSetup,
    pub commands: Vec<RecordedCommand>,
    pub frames: Vec<TelemetryFrame>,
    pub events: Vec<IndexedEvent>,
}

impl SessionRecord {
    pub fn new(config: Config, scene: SceneSetup) -> Self {
        Self {
            format: RECORD_FORMAT.into(),
            version: RECORD_VERSION,
            config,
            scene,
            commands: Vec::new(),
            frames: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn push_frame(&mut self, frame: TelemetryFrame) {
        let index = self.frames.len();
        self.events.extend(frame.contact_events().map(|&event| IndexedEvent {
            frame: index,
            event,
        }));
        self.frames.push(frame);
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Time of the last frame, s.
    pub fn duration(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.t)
    }

    pub fn contact_events(&self) -> impl Iterator<Item = &ContactEvent> {
        self.events.iter().map(|e| &e.event)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(self).expect("records always serialize");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RecordError> {
        let rec: SessionRecord =
            serde_json::from_slice(bytes).map_err(|e| RecordError::Corrupt(e.to_string()))?;
        if rec.format != RECORD_FORMAT || rec.version != RECORD_VERSION {
            return Err(RecordError::Corrupt(format!(
                "unsupported record format {} v{}",
                rec.format, rec.version
            )));
        }
        rec.config
            .validate()
            .map_err(|e| RecordError::Corrupt(format!("embedded config: {e}")))?;
        if rec.frames.windows(2).any(|w| w[1].t.partial_cmp(&w[0].t) != Some(std::cmp::Ordering::Greater)) {
            return Err(RecordError::Corrupt("frame times are not increasing".into()));
        }
        Ok(rec)
    }

    pub fn save(&self, path: &Path) -> Result<(), RecordError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| RecordError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, RecordError> {
        let bytes = std::fs::read(path).map_err(|source| RecordError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// Re-runs the recorded command stream under the recorded configuration
    /// for as many ticks as were recorded.
    pub fn replay(&self) -> Result<SessionRecord, RecordError> {
        let mut sim = Simulation::new(&self.config, &self.scene)?;
        let mut out = SessionRecord::new(self.config.clone(), self.scene);
        let mut commands = self.commands.iter().peekable();
        for _ in 0..self.frames.len() {
            let next_tick = sim.tick() + 1;
            while let Some(c) = commands.next_if(|c| c.tick <= next_tick) {
                sim.submit(c.command);
            }
            out.push_frame(sim.step()?);
        }
        out.commands = sim.command_log().to_vec();
        Ok(out)
    }
}
