use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clients::{
    GenerationRequest, HttpService, JobKind, MockGenerator, MockJudge, MockRewriter, PromptRewriter, VideoGenerator,
    VideoJudge,
};
use super::config::PipelineConfig;
use super::prompts::{REJECTION_SYSTEM_PROMPT, REWRITER_SYSTEM_PROMPT};
use crate::dataset::{
    fold_manifest, load_clip, ManifestEntry, ManifestStats, ManifestWriter, RdsHqLayout, Stage, VerdictLabel,
};
use crate::error::{Error, Result};
use crate::render::{chunk_count, render_hdmap_video, output::write_raw_video, ChunkName, RenderSpec, Weather, CHUNK_FRAMES};
use crate::scene::SceneClip;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriteResult {
    pub caption: String,
    pub target: Weather,
    pub prompt: String,
}

/// One rewrite request per target, in target order.
pub fn rewrite_prompts(caption: &str, targets: &[Weather], client: &dyn PromptRewriter) -> Result<Vec<RewriteResult>> {
    if caption.trim().is_empty() && !targets.is_empty() {
        return Err(Error::InvalidInput("caption must not be empty".into()));
    }
    targets
        .iter()
        .map(|&target| {
            let stage_err = |message: String| Error::Stage {
                stage: "rewrite".into(),
                context: target.to_string(),
                message,
            };
            let prompt = client
                .rewrite(REWRITER_SYSTEM_PROMPT, caption, target)
                .map_err(|e| stage_err(e.to_string()))?;
            if prompt.trim().is_empty() {
                return Err(stage_err("empty rewritten prompt".into()));
            }
            Ok(RewriteResult {
                caption: caption.to_string(),
                target,
                prompt,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub chunk: ChunkName,
    pub label: VerdictLabel,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RejectionReport {
    pub verdicts: Vec<Verdict>,
    /// Chunks whose judge call failed; their verdict is pending.
    pub retry_queue: Vec<ChunkName>,
}

impl RejectionReport {
    pub fn clean(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| v.label == VerdictLabel::Clean)
    }

    /// `artifacted / decided`; 0 when nothing was decided.
    pub fn discard_rate(&self) -> f64 {
        let artifacted = self.verdicts.iter().filter(|v| v.label == VerdictLabel::Artifacted).count();
        let decided = self.verdicts.iter().filter(|v| v.label != VerdictLabel::Pending).count();
        if decided == 0 {
            0.0
        } else {
            artifacted as f64 / decided as f64
        }
    }
}

fn judge_one(judge: &dyn VideoJudge, chunk: &ChunkName, uri: &str) -> Result<Verdict> {
    let r = judge.judge(REJECTION_SYSTEM_PROMPT, chunk, uri)?;
    if r.label == VerdictLabel::Pending {
        return Err(Error::Service {
            endpoint: "judge".into(),
            message: format!("no decision for {chunk}"),
        });
    }
    Ok(Verdict {
        chunk: chunk.clone(),
        label: r.label,
        rationale: r.rationale,
    })
}

/// Exactly one verdict per chunk; failed calls yield `pending` and a retry
/// queue entry.
pub fn run_rejection_sampling(chunks: &[(ChunkName, String)], judge: &dyn VideoJudge) -> RejectionReport {
    let mut report = RejectionReport::default();
    for (chunk, uri) in chunks {
        match judge_one(judge, chunk, uri) {
            Ok(v) => report.verdicts.push(v),
            Err(e) => {
                log::warn!("judge failed for {chunk}: {e}");
                report.verdicts.push(Verdict {
                    chunk: chunk.clone(),
                    label: VerdictLabel::Pending,
                    rationale: e.to_string(),
                });
                report.retry_queue.push(chunk.clone());
            }
        }
    }
    report
}

pub trait Clock: Send + Sync {
    /// Seconds since the Unix epoch.
    fn now(&self) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        chrono::Utc::now().timestamp_micros() as f64 * 1e-6
    }
}

/// Always returns the same instant; for reproducible manifests.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub f64);

impl Clock for FixedClock {
    fn now(&self) -> f64 {
        self.0
    }
}

pub struct Services {
    pub rewriter: Box<dyn PromptRewriter>,
    pub generator: Box<dyn VideoGenerator>,
    pub expander: Option<Box<dyn VideoGenerator>>,
    pub judge: Box<dyn VideoJudge>,
    pub poll_interval: Duration,
    pub max_polls: u32,
}

impl Services {
    pub fn mock(flag_numerator: u64, flag_denominator: u64) -> Self {
        Self {
            rewriter: Box::new(MockRewriter),
            generator: Box::new(MockGenerator),
            expander: Some(Box::new(MockGenerator)),
            judge: Box::new(MockJudge::hash_partition(flag_numerator, flag_denominator)),
            poll_interval: Duration::ZERO,
            max_polls: 1,
        }
    }

    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        if cfg.mock {
            let (n, d) = cfg.mock_flag_rate;
            return Ok(Self::mock(n as u64, d as u64));
        }
        let ep = cfg
            .endpoints
            .as_ref()
            .ok_or_else(|| Error::Config("endpoints required unless mock is set".into()))?;
        Ok(Self {
            rewriter: Box::new(HttpService::new(ep.rewriter.clone())?),
            generator: Box::new(HttpService::new(ep.generator.clone())?),
            expander: match &ep.expander {
                Some(e) => Some(Box::new(HttpService::new(e.clone())?)),
                None => None,
            },
            judge: Box::new(HttpService::new(ep.judge.clone())?),
            poll_interval: Duration::from_millis(ep.generator.poll_interval_ms),
            max_polls: ep.generator.max_polls,
        })
    }
}

pub struct RunOptions {
    pub clock: Arc<dyn Clock>,
    /// Fault injection: stop after this many manifest appends.
    pub max_writes: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            clock: Arc::new(SystemClock),
            max_writes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineReport {
    /// Latest snapshot per chunk.
    pub entries: Vec<ManifestEntry>,
    pub stats: ManifestStats,
    pub failures: BTreeMap<Stage, Vec<String>>,
    pub appended: usize,
}

impl PipelineReport {
    pub fn discard_rate(&self) -> f64 {
        self.stats.discard_rate()
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty() && self.stats.pending == 0
    }
}

/// Stage sequence implied by the config.
pub fn stage_order(cfg: &PipelineConfig) -> Vec<Stage> {
    let mut s = vec![Stage::Rendered, Stage::Rewritten, Stage::Generated];
    match (cfg.expand, cfg.filter_after_expansion) {
        (true, true) => s.extend([Stage::Expanded, Stage::Filtered]),
        (true, false) => s.extend([Stage::Filtered, Stage::Expanded]),
        (false, _) => s.push(Stage::Filtered),
    }
    s
}

fn condition_stem(cfg: &PipelineConfig, clip_id: &str, chunk: u32) -> PathBuf {
    cfg.output_dir.join("conditions").join(format!("{clip_id}_{chunk}"))
}

/// Full chunks available in a clip at the render fps.
pub fn clip_chunk_count(clip: &SceneClip, spec: &RenderSpec, max: Option<u32>) -> u32 {
    let (t0, t1) = clip.time_span();
    let frames = ((t1 - t0) * spec.fps + 1e-9).floor() as usize + 1;
    let frames = frames.saturating_sub(spec.start_frame as usize);
    let n = chunk_count(frames) as u32;
    max.map_or(n, |m| n.min(m))
}

/// Renders the condition chunks of a clip unless all already exist.
fn render_conditions(cfg: &PipelineConfig, clip: &SceneClip, chunks: u32) -> Result<()> {
    let stems: Vec<PathBuf> = (0..chunks).map(|k| condition_stem(cfg, clip.clip_id(), k)).collect();
    if stems.iter().all(|s| s.with_extension("json").exists()) {
        return Ok(());
    }
    let dir = cfg.output_dir.join("conditions");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut spec = cfg.render.clone();
    spec.frame_count = chunks * CHUNK_FRAMES as u32;
    let frames = render_hdmap_video(clip, &spec)?;
    for (k, stem) in stems.iter().enumerate() {
        write_raw_video(stem, &frames[k * CHUNK_FRAMES..(k + 1) * CHUNK_FRAMES], spec.fps)?;
    }
    Ok(())
}

struct Runner<'a> {
    opts: &'a RunOptions,
    pool: rayon::ThreadPool,
    writer: ManifestWriter,
    state: HashMap<ChunkName, ManifestEntry>,
    failures: BTreeMap<Stage, Vec<String>>,
}

impl Runner<'_> {
    fn record(&mut self, snapshot: ManifestEntry) -> Result<()> {
        self.writer.append(&snapshot)?;
        self.state.insert(snapshot.name().clone(), snapshot);
        Ok(())
    }

    /// Applies `f` to every unit that finished `prev` but not `stage`,
    /// in parallel, then appends snapshots in unit order.
    fn stage<F>(&mut self, units: &[ChunkName], prev: Stage, stage: Stage, f: F) -> Result<()>
    where
        F: Fn(&ManifestEntry) -> Result<ManifestEntry> + Sync,
    {
        let todo: Vec<ManifestEntry> = units
            .iter()
            .filter_map(|u| self.state.get(u))
            .filter(|e| e.stage_times.contains_key(&prev) && !e.stage_times.contains_key(&stage))
            .cloned()
            .collect();
        let results: Vec<Result<ManifestEntry>> = self.pool.install(|| todo.par_iter().map(&f).collect());
        for (e, r) in todo.iter().zip(results) {
            let snapshot = match r {
                Ok(next) => next.advanced(stage, self.opts.clock.now()),
                Err(err) => {
                    log::error!("{} failed at {}: {err}", e.name(), stage.as_str());
                    self.failures.entry(stage).or_default().push(e.name().to_string());
                    let mut failed = e.clone();
                    failed.error = Some(format!("{}: {err}", stage.as_str()));
                    failed
                }
            };
            self.record(snapshot)?;
        }
        Ok(())
    }
}

/// Runs render, rewrite, generation, expansion and filtering for every
/// clip x weather x chunk, appending manifest snapshots after each stage.
/// Units that already completed a stage in an existing manifest are
/// skipped, so re-running after an interruption continues where it
/// stopped.
pub fn run_pipeline(clip_ids: &[String], cfg: &PipelineConfig, services: &Services, opts: &RunOptions) -> Result<PipelineReport> {
    cfg.validate()?;
    let layout = RdsHqLayout::new(&cfg.layout);
    let (writer, log) = ManifestWriter::open(&cfg.manifest_path())?;
    let writer = writer.with_max_writes(opts.max_writes);
    let state: HashMap<ChunkName, ManifestEntry> = fold_manifest(&log.entries)
        .into_iter()
        .map(|e| (e.name().clone(), e))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start workers: {e}")))?;
    let mut runner = Runner {
        opts,
        pool,
        writer,
        state,
        failures: BTreeMap::new(),
    };

    // Stage 1: render conditions per clip.
    let mut units: Vec<ChunkName> = Vec::new();
    let mut captions: HashMap<String, String> = HashMap::new();
    for clip_id in clip_ids {
        let clip = load_clip(&layout, clip_id)?;
        let chunks = clip_chunk_count(&clip, &cfg.render, cfg.max_chunks_per_clip);
        if chunks == 0 {
            log::warn!("clip {clip_id} is shorter than one chunk; skipped");
        }
        captions.insert(clip_id.clone(), clip.caption().to_string());
        let mut clip_units = Vec::new();
        for &w in &cfg.weathers {
            for k in 0..chunks {
                clip_units.push(ChunkName::new(clip_id.as_str(), k, w)?);
            }
        }
        let missing = clip_units.iter().any(|u| !runner.state.contains_key(u));
        if missing {
            let rendered = render_conditions(cfg, &clip, chunks);
            for u in &clip_units {
                if runner.state.contains_key(u) {
                    continue;
                }
                let mut e = ManifestEntry::new(u.clone(), Stage::Rendered, runner.opts.clock.now());
                match &rendered {
                    Ok(()) => {
                        e.condition = Some(format!("conditions/{}_{}.rgb", u.clip_id(), u.chunk_id()));
                    }
                    Err(err) => {
                        e.stage_times.clear();
                        e.error = Some(format!("rendered: {err}"));
                        runner.failures.entry(Stage::Rendered).or_default().push(u.to_string());
                    }
                }
                runner.record(e)?;
            }
        }
        units.extend(clip_units);
    }

    let order = stage_order(cfg);
    for w in order.windows(2) {
        let (prev, stage) = (w[0], w[1]);
        match stage {
            Stage::Rewritten => {
                // One request per (clip, weather).
                let mut keys: Vec<(String, Weather)> = units
                    .iter()
                    .filter(|u| {
                        runner
                            .state
                            .get(*u)
                            .is_some_and(|e| e.stage_times.contains_key(&prev) && !e.stage_times.contains_key(&stage))
                    })
                    .map(|u| (u.clip_id().to_string(), u.weather()))
                    .collect();
                keys.dedup();
                let prompts: Vec<Result<String>> = runner.pool.install(|| {
                    keys.par_iter()
                        .map(|(clip, w)| {
                            rewrite_prompts(&captions[clip], &[*w], services.rewriter.as_ref())
                                .map(|mut r| r.remove(0).prompt)
                        })
                        .collect()
                });
                let table: HashMap<(String, Weather), std::result::Result<String, String>> = keys
                    .into_iter()
                    .zip(prompts)
                    .map(|(k, r)| (k, r.map_err(|e| e.to_string())))
                    .collect();
                runner.stage(&units, prev, stage, |e| {
                    match &table[&(e.clip_id().to_string(), e.weather())] {
                        Ok(p) => {
                            let mut n = e.clone();
                            n.prompt = Some(p.clone());
                            Ok(n)
                        }
                        Err(m) => Err(Error::Stage {
                            stage: "rewrite".into(),
                            context: e.name().to_string(),
                            message: m.clone(),
                        }),
                    }
                })?;
            }
            Stage::Generated => runner.stage(&units, prev, stage, |e| {
                let req = GenerationRequest {
                    kind: JobKind::Generate,
                    chunk: e.name().clone(),
                    model: String::new(),
                    prompt: e.prompt.clone().unwrap_or_default(),
                    condition: condition_location(cfg, e),
                    source_uri: None,
                    format: cfg.generation,
                };
                let uri = services
                    .generator
                    .run(&req, services.poll_interval, services.max_polls)
                    .map_err(|err| stage_error("generate", e, err))?;
                let mut n = e.clone();
                n.artifact_uri = Some(uri);
                Ok(n)
            })?,
            Stage::Expanded => runner.stage(&units, prev, stage, |e| {
                let expander = services
                    .expander
                    .as_ref()
                    .ok_or_else(|| Error::Config("no expander service".into()))?;
                let req = GenerationRequest {
                    kind: JobKind::Expand,
                    chunk: e.name().clone(),
                    model: String::new(),
                    prompt: e.prompt.clone().unwrap_or_default(),
                    condition: condition_location(cfg, e),
                    source_uri: e.artifact_uri.clone(),
                    format: cfg.expansion,
                };
                let uri = expander
                    .run(&req, services.poll_interval, services.max_polls)
                    .map_err(|err| stage_error("expand", e, err))?;
                let mut n = e.clone();
                n.expansion_uri = Some(uri);
                Ok(n)
            })?,
            Stage::Filtered => runner.stage(&units, prev, stage, |e| {
                let uri = if cfg.expand && cfg.filter_after_expansion {
                    e.expansion_uri.clone()
                } else {
                    e.artifact_uri.clone()
                }
                .unwrap_or_default();
                let v = judge_one(services.judge.as_ref(), e.name(), &uri).map_err(|err| stage_error("filter", e, err))?;
                let mut n = e.clone();
                n.verdict = v.label;
                n.rationale = Some(v.rationale);
                Ok(n)
            })?,
            Stage::Rendered => unreachable!("rendering is the first stage"),
        }
    }

    let entries: Vec<ManifestEntry> = units.iter().filter_map(|u| runner.state.get(u).cloned()).collect();
    Ok(PipelineReport {
        stats: ManifestStats::from_entries(&entries),
        entries,
        failures: runner.failures,
        appended: runner.writer.writes(),
    })
}

/// Manifest condition paths are relative to the output directory.
fn condition_location(cfg: &PipelineConfig, e: &ManifestEntry) -> String {
    e.condition
        .as_ref()
        .map(|c| cfg.output_dir.join(c).display().to_string())
        .unwrap_or_default()
}

fn stage_error(stage: &str, e: &ManifestEntry, err: Error) -> Error {
    Error::Stage {
        stage: stage.into(),
        context: e.name().to_string(),
        message: err.to_string(),
    }
}

/// Statistics of a manifest file.
pub fn manifest_stats(path: &Path) -> Result<ManifestStats> {
    let log = crate::dataset::read_manifest(path)?;
    Ok(ManifestStats::from_entries(&fold_manifest(&log.entries)))
}
