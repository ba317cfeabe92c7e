//! Newline-delimited JSON manifest of generated chunks.
//!
//! The file is an append-only log: each line is a snapshot of one entry
//! after a pipeline stage. The current state of a chunk is its last line.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::{ChunkName, Weather};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Rendered,
    Rewritten,
    Generated,
    Expanded,
    Filtered,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Rendered => "rendered",
            Stage::Rewritten => "rewritten",
            Stage::Generated => "generated",
            Stage::Expanded => "expanded",
            Stage::Filtered => "filtered",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictLabel {
    #[default]
    Pending,
    Clean,
    Artifacted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestRecord {
    name: ChunkName,
    clip_id: String,
    chunk_id: u32,
    weather: Weather,
    stage: Stage,
    #[serde(default)]
    stage_times: BTreeMap<Stage, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    condition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    artifact_uri: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expansion_uri: Option<String>,
    #[serde(default)]
    verdict: VerdictLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rationale: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// State of one chunk. `clip_id`, `chunk_id` and `weather` always agree
/// with `name`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ManifestRecord", into = "ManifestRecord")]
pub struct ManifestEntry {
    name: ChunkName,
    /// Last completed stage.
    pub stage: Stage,
    pub stage_times: BTreeMap<Stage, f64>,
    /// Path of the rendered condition video.
    pub condition: Option<String>,
    pub prompt: Option<String>,
    pub artifact_uri: Option<String>,
    pub expansion_uri: Option<String>,
    pub verdict: VerdictLabel,
    pub rationale: Option<String>,
    /// Last failure message, if a stage failed for this entry.
    pub error: Option<String>,
}

impl TryFrom<ManifestRecord> for ManifestEntry {
    type Error = Error;

    fn try_from(r: ManifestRecord) -> Result<Self> {
        if r.clip_id != r.name.clip_id() || r.chunk_id != r.name.chunk_id() || r.weather != r.name.weather() {
            return Err(Error::Invariant(format!(
                "manifest entry fields disagree with name {}",
                r.name
            )));
        }
        Ok(ManifestEntry {
            name: r.name,
            stage: r.stage,
            stage_times: r.stage_times,
            condition: r.condition,
            prompt: r.prompt,
            artifact_uri: r.artifact_uri,
            expansion_uri: r.expansion_uri,
            verdict: r.verdict,
            rationale: r.rationale,
            error: r.error,
        })
    }
}

impl From<ManifestEntry> for ManifestRecord {
    fn from(e: ManifestEntry) -> Self {
        ManifestRecord {
            clip_id: e.name.clip_id().to_string(),
            chunk_id: e.name.chunk_id(),
            weather: e.name.weather(),
            name: e.name,
            stage: e.stage,
            stage_times: e.stage_times,
            condition: e.condition,
            prompt: e.prompt,
            artifact_uri: e.artifact_uri,
            expansion_uri: e.expansion_uri,
            verdict: e.verdict,
            rationale: e.rationale,
            error: e.error,
        }
    }
}

impl ManifestEntry {
    pub fn new(name: ChunkName, stage: Stage, time: f64) -> Self {
        ManifestEntry {
            name,
            stage,
            stage_times: BTreeMap::from([(stage, time)]),
            condition: None,
            prompt: None,
            artifact_uri: None,
            expansion_uri: None,
            verdict: VerdictLabel::Pending,
            rationale: None,
            error: None,
        }
    }

    pub fn name(&self) -> &ChunkName {
        &self.name
    }

    pub fn clip_id(&self) -> &str {
        self.name.clip_id()
    }

    pub fn weather(&self) -> Weather {
        self.name.weather()
    }

    /// Snapshot after completing `stage` at `time`.
    pub fn advanced(&self, stage: Stage, time: f64) -> Self {
        let mut e = self.clone();
        e.stage = stage;
        e.stage_times.insert(stage, time);
        e.error = None;
        e
    }

    pub fn to_line(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Complete lines of a manifest file plus the byte length they occupy; a
/// trailing line without a newline is reported as partial.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ManifestLog {
    pub entries: Vec<ManifestEntry>,
    pub complete_len: u64,
    pub partial_tail: bool,
}

pub fn read_manifest(path: &Path) -> Result<ManifestLog> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(ManifestLog::default()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut log = ManifestLog::default();
    let mut start = 0usize;
    let mut line_no = 0usize;
    while start < bytes.len() {
        let Some(nl) = bytes[start..].iter().position(|b| *b == b'\n') else {
            log.partial_tail = true;
            break;
        };
        line_no += 1;
        let line = &bytes[start..start + nl];
        if !line.iter().all(u8::is_ascii_whitespace) {
            let entry: ManifestEntry = serde_json::from_slice(line)
                .map_err(|e| Error::parse(format!("{}:{line_no}", path.display()), e))?;
            log.entries.push(entry);
        }
        start += nl + 1;
        log.complete_len = start as u64;
    }
    Ok(log)
}

/// Latest snapshot per chunk, in order of first appearance.
pub fn fold_manifest(entries: &[ManifestEntry]) -> Vec<ManifestEntry> {
    let mut order: Vec<ChunkName> = Vec::new();
    let mut latest: HashMap<ChunkName, &ManifestEntry> = HashMap::new();
    for e in entries {
        if latest.insert(e.name.clone(), e).is_none() {
            order.push(e.name.clone());
        }
    }
    order.into_iter().map(|n| latest[&n].clone()).collect()
}

/// Single appender for a manifest file.
#[derive(Debug)]
pub struct ManifestWriter {
    path: PathBuf,
    file: File,
    writes: usize,
    max_writes: Option<usize>,
}

impl ManifestWriter {
    /// Opens for appending, first truncating any partial trailing line.
    pub fn open(path: &Path) -> Result<(Self, ManifestLog)> {
        let log = read_manifest(path)?;
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        if log.partial_tail {
            log::warn!("{}: dropping partial trailing line", path.display());
            file.set_len(log.complete_len).map_err(|e| Error::io(path, e))?;
        }
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
                writes: 0,
                max_writes: None,
            },
            log,
        ))
    }

    /// Simulates a crash: after `n` complete appends, the next append writes
    /// half a line and fails with [`Error::Interrupted`].
    pub fn with_max_writes(mut self, n: Option<usize>) -> Self {
        self.max_writes = n;
        self
    }

    pub fn append(&mut self, entry: &ManifestEntry) -> Result<()> {
        let line = entry.to_line()?;
        if self.max_writes == Some(self.writes) {
            let half = &line.as_bytes()[..line.len() / 2];
            self.file.write_all(half).map_err(|e| Error::io(&self.path, e))?;
            return Err(Error::Interrupted { writes: self.writes });
        }
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))?;
        self.writes += 1;
        Ok(())
    }

    pub fn writes(&self) -> usize {
        self.writes
    }
}

/// Discard statistics over the latest snapshot of each chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ManifestStats {
    pub entries: usize,
    pub clean: usize,
    pub artifacted: usize,
    pub pending: usize,
    pub failed: usize,
}

impl ManifestStats {
    pub fn from_entries(latest: &[ManifestEntry]) -> Self {
        let mut s = ManifestStats {
            entries: latest.len(),
            ..Default::default()
        };
        for e in latest {
            match e.verdict {
                VerdictLabel::Clean => s.clean += 1,
                VerdictLabel::Artifacted => s.artifacted += 1,
                VerdictLabel::Pending => s.pending += 1,
            }
            if e.error.is_some() {
                s.failed += 1;
            }
        }
        s
    }

    /// `artifacted / (clean + artifacted)`, or 0 with no decided verdicts.
    pub fn discard_rate(&self) -> f64 {
        let decided = self.clean + self.artifacted;
        if decided == 0 {
            0.0
        } else {
            self.artifacted as f64 / decided as f64
        }
    }
}
