//! Model service clients: prompt rewriter, video generator / expander (job
//! protocol), and the VLM judge. Each has an HTTP and an in-process mock
//! implementation.
//!
//! Wire protocol (JSON):
//! * `POST /v1/rewrite` [`RewriteBody`] -> `{"prompt": ...}`
//! * `POST /v1/jobs` [`GenerationRequest`] -> `{"job_id": ...}`
//! * `GET /v1/jobs/{id}` -> [`JobStatus`]
//! * `POST /v1/judge` [`JudgeBody`] -> [`JudgeResponse`]

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::config::{EndpointConfig, VideoFormat};
use crate::dataset::VerdictLabel;
use crate::error::{Error, Result};
use crate::render::{ChunkName, Weather};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriteBody {
    pub model: String,
    pub system_prompt: String,
    pub caption: String,
    pub target: Weather,
    pub instruction: String,
}

impl RewriteBody {
    pub fn new(model: &str, system_prompt: &str, caption: &str, target: Weather) -> Self {
        Self {
            model: model.to_string(),
            system_prompt: system_prompt.to_string(),
            caption: caption.to_string(),
            target,
            instruction: format!("Rewrite the caption for {}.", target.description()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RewriteResponse {
    prompt: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Generate,
    Expand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub kind: JobKind,
    pub chunk: ChunkName,
    pub model: String,
    pub prompt: String,
    /// Condition video location.
    pub condition: String,
    /// Generated video to expand, for expansion jobs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_uri: Option<String>,
    pub format: VideoFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct JobCreated {
    job_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobStatus {
    Pending,
    Done { artifact_uri: String },
    Failed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeBody {
    pub model: String,
    pub system_prompt: String,
    pub chunk: ChunkName,
    pub video_uri: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeResponse {
    pub label: VerdictLabel,
    #[serde(default)]
    pub rationale: String,
}

pub trait PromptRewriter: Send + Sync {
    fn rewrite(&self, system_prompt: &str, caption: &str, target: Weather) -> Result<String>;
}

pub trait VideoGenerator: Send + Sync {
    fn submit(&self, req: &GenerationRequest) -> Result<String>;
    fn poll(&self, job_id: &str) -> Result<JobStatus>;

    /// Submits and polls until the job finishes.
    fn run(&self, req: &GenerationRequest, interval: Duration, max_polls: u32) -> Result<String> {
        let id = self.submit(req)?;
        for _ in 0..max_polls {
            match self.poll(&id)? {
                JobStatus::Done { artifact_uri } => return Ok(artifact_uri),
                JobStatus::Failed { message } => {
                    return Err(Error::Service {
                        endpoint: format!("job {id}"),
                        message,
                    })
                }
                JobStatus::Pending => std::thread::sleep(interval),
            }
        }
        Err(Error::Service {
            endpoint: format!("job {id}"),
            message: format!("still pending after {max_polls} polls"),
        })
    }
}

pub trait VideoJudge: Send + Sync {
    fn judge(&self, system_prompt: &str, chunk: &ChunkName, video_uri: &str) -> Result<JudgeResponse>;
}

/// Blocking JSON client for one endpoint.
pub struct HttpService {
    cfg: EndpointConfig,
    client: reqwest::blocking::Client,
    token: Option<String>,
}

impl HttpService {
    pub fn new(cfg: EndpointConfig) -> Result<Self> {
        cfg.validate()?;
        let token = cfg.token()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout())
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(Self { cfg, client, token })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.cfg.base_url.trim_end_matches('/'))
    }

    fn send<T: serde::de::DeserializeOwned>(&self, req: reqwest::blocking::RequestBuilder, url: &str) -> Result<T> {
        let req = match &self.token {
            Some(t) => req.bearer_auth(t),
            None => req,
        };
        let err = |message: String| Error::Service {
            endpoint: url.to_string(),
            message,
        };
        let resp = req.send().map_err(|e| err(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(err(format!("HTTP {status}: {body}")));
        }
        resp.json().map_err(|e| err(format!("bad response body: {e}")))
    }

    fn post<B: Serialize, T: serde::de::DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let url = self.url(path);
        self.cfg.retry.run(|| self.send(self.client.post(&url).json(body), &url))
    }

    fn get<T: serde::de::DeserializeOwned>(&self, path: &str) -> Result<T> {
        let url = self.url(path);
        self.cfg.retry.run(|| self.send(self.client.get(&url), &url))
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }
}

impl PromptRewriter for HttpService {
    fn rewrite(&self, system_prompt: &str, caption: &str, target: Weather) -> Result<String> {
        let body = RewriteBody::new(&self.cfg.model, system_prompt, caption, target);
        let r: RewriteResponse = self.post("/v1/rewrite", &body)?;
        Ok(r.prompt)
    }
}

impl VideoGenerator for HttpService {
    fn submit(&self, req: &GenerationRequest) -> Result<String> {
        let mut req = req.clone();
        if req.model.is_empty() {
            req.model = self.cfg.model.clone();
        }
        let r: JobCreated = self.post("/v1/jobs", &req)?;
        Ok(r.job_id)
    }

    fn poll(&self, job_id: &str) -> Result<JobStatus> {
        self.get(&format!("/v1/jobs/{job_id}"))
    }
}

impl VideoJudge for HttpService {
    fn judge(&self, system_prompt: &str, chunk: &ChunkName, video_uri: &str) -> Result<JudgeResponse> {
        let body = JudgeBody {
            model: self.cfg.model.clone(),
            system_prompt: system_prompt.to_string(),
            chunk: chunk.clone(),
            video_uri: video_uri.to_string(),
        };
        self.post("/v1/judge", &body)
    }
}

/// Rewrites to `"<target>:<caption>"`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockRewriter;

impl PromptRewriter for MockRewriter {
    fn rewrite(&self, _system_prompt: &str, caption: &str, target: Weather) -> Result<String> {
        Ok(mock_rewrite(caption, target))
    }
}

pub fn mock_rewrite(caption: &str, target: Weather) -> String {
    format!("{target}:{caption}")
}

/// Completes every job immediately with a URI derived from the request.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockGenerator;

pub fn mock_job_id(req: &GenerationRequest) -> String {
    let kind = match req.kind {
        JobKind::Generate => "generate",
        JobKind::Expand => "expand",
    };
    format!("{kind}-{}", req.chunk)
}

pub fn mock_artifact_uri(job_id: &str) -> String {
    format!("mock://artifacts/{job_id}.mp4")
}

impl VideoGenerator for MockGenerator {
    fn submit(&self, req: &GenerationRequest) -> Result<String> {
        Ok(mock_job_id(req))
    }

    fn poll(&self, job_id: &str) -> Result<JobStatus> {
        Ok(JobStatus::Done {
            artifact_uri: mock_artifact_uri(job_id),
        })
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Flags a chunk when `fnv1a(name) % denominator < numerator`, or when it
/// is in an explicit list.
#[derive(Debug, Clone, Default)]
pub struct MockJudge {
    pub numerator: u64,
    pub denominator: u64,
    pub flagged: std::collections::HashSet<String>,
}

impl MockJudge {
    pub fn hash_partition(numerator: u64, denominator: u64) -> Self {
        Self {
            numerator,
            denominator: denominator.max(1),
            flagged: Default::default(),
        }
    }

    pub fn flagging<I: IntoIterator<Item = String>>(names: I) -> Self {
        Self {
            numerator: 0,
            denominator: 1,
            flagged: names.into_iter().collect(),
        }
    }

    pub fn is_flagged(&self, chunk: &str) -> bool {
        self.flagged.contains(chunk)
            || (self.denominator > 0 && fnv1a(chunk.as_bytes()) % self.denominator < self.numerator)
    }
}

impl VideoJudge for MockJudge {
    fn judge(&self, _system_prompt: &str, chunk: &ChunkName, _video_uri: &str) -> Result<JudgeResponse> {
        let name = chunk.to_string();
        Ok(if self.is_flagged(&name) {
            JudgeResponse {
                label: VerdictLabel::Artifacted,
                rationale: "mock: flagged".into(),
            }
        } else {
            JudgeResponse {
                label: VerdictLabel::Clean,
                rationale: "mock: no artifacts".into(),
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn job_status_wire_format() {
        let s: JobStatus = serde_json::from_str(r#"{"status":"done","artifact_uri":"x"}"#).unwrap();
        assert_eq!(s, JobStatus::Done { artifact_uri: "x".into() });
        let s: JobStatus = serde_json::from_str(r#"{"status":"pending"}"#).unwrap();
        assert_eq!(s, JobStatus::Pending);
    }

    #[test]
    fn mock_generator_runs() {
        let req = GenerationRequest {
            kind: JobKind::Generate,
            chunk: "abc_0_foggy".parse().unwrap(),
            model: String::new(),
            prompt: "p".into(),
            condition: "c".into(),
            source_uri: None,
            format: VideoFormat::GENERATION,
        };
        let uri = MockGenerator.run(&req, Duration::ZERO, 1).unwrap();
        assert_eq!(uri, "mock://artifacts/generate-abc_0_foggy.mp4");
    }
}
