use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::{RenderSpec, Weather};

fn default_attempts() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    500
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: default_attempts(),
            backoff_ms: default_backoff_ms(),
        }
    }
}

impl RetryPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_attempts == 0 {
            return Err(Error::Config("retry max_attempts must be at least 1".into()));
        }
        Ok(())
    }

    /// Runs `f` until it succeeds or attempts are exhausted; returns the last
    /// error.
    pub fn run<T>(&self, mut f: impl FnMut() -> Result<T>) -> Result<T> {
        let mut delay = self.backoff_ms;
        let mut attempt = 1;
        loop {
            match f() {
                Ok(v) => return Ok(v),
                Err(e) if attempt >= self.max_attempts => return Err(e),
                Err(e) => {
                    log::warn!("attempt {attempt}/{} failed: {e}", self.max_attempts);
                    std::thread::sleep(Duration::from_millis(delay));
                    delay = delay.saturating_mul(2);
                    attempt += 1;
                }
            }
        }
    }
}

fn default_timeout() -> f64 {
    60.0
}

/// A remote model service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    /// Name of the environment variable holding a bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub model: String,
    /// Interval between job status polls.
    #[serde(default = "default_poll_ms")]
    pub poll_interval_ms: u64,
    /// Polls before a job is reported as timed out.
    #[serde(default = "default_max_polls")]
    pub max_polls: u32,
}

fn default_poll_ms() -> u64 {
    200
}

fn default_max_polls() -> u32 {
    600
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            token_env: None,
            timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
            model: String::new(),
            poll_interval_ms: default_poll_ms(),
            max_polls: default_max_polls(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(Error::Config(format!("{}: timeout must be positive", self.base_url)));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(Error::Config(format!("{}: base_url must be http(s)", self.base_url)));
        }
        self.retry.validate()
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    /// Resolves the token from the environment. A configured but unset
    /// variable is an error.
    pub fn token(&self) -> Result<Option<String>> {
        match &self.token_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| Error::Config(format!("environment variable {var} is not set"))),
        }
    }
}

/// Video request geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoFormat {
    pub width: u32,
    pub height: u32,
    pub frames: u32,
    pub fps: f64,
}

impl VideoFormat {
    pub const GENERATION: VideoFormat = VideoFormat {
        width: 1280,
        height: 704,
        frames: 121,
        fps: 30.0,
    };

    /// Multi-view expansion covers the first 57 frames at 1024x576.
    pub const EXPANSION: VideoFormat = VideoFormat {
        width: 1024,
        height: 576,
        frames: 57,
        fps: 30.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoints {
    pub rewriter: EndpointConfig,
    pub generator: EndpointConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expander: Option<EndpointConfig>,
    pub judge: EndpointConfig,
}

fn default_weathers() -> Vec<Weather> {
    Weather::ALL.to_vec()
}

fn default_true() -> bool {
    true
}

fn default_workers() -> usize {
    4
}

fn default_flag_rate() -> (u32, u32) {
    (3, 100)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Archive layout root.
    pub layout: PathBuf,
    /// Conditions, manifest and previews go here.
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default = "default_weathers")]
    pub weathers: Vec<Weather>,
    #[serde(default)]
    pub render: RenderSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_chunks_per_clip: Option<u32>,
    /// Request multi-view expansion of each generated chunk.
    #[serde(default = "default_true")]
    pub expand: bool,
    /// Judge expanded videos (true) or single-view generations (false).
    #[serde(default = "default_true")]
    pub filter_after_expansion: bool,
    /// Per-stage worker pool width.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_format_generation")]
    pub generation: VideoFormat,
    #[serde(default = "default_format_expansion")]
    pub expansion: VideoFormat,
    /// Use in-process mock services instead of `endpoints`.
    #[serde(default)]
    pub mock: bool,
    /// Fraction (numerator, denominator) of chunks the mock judge flags.
    #[serde(default = "default_flag_rate")]
    pub mock_flag_rate: (u32, u32),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<Endpoints>,
}

fn default_format_generation() -> VideoFormat {
    VideoFormat::GENERATION
}

fn default_format_expansion() -> VideoFormat {
    VideoFormat::EXPANSION
}

impl PipelineConfig {
    pub fn new(layout: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            layout: layout.into(),
            output_dir: output_dir.into(),
            manifest: None,
            weathers: default_weathers(),
            render: RenderSpec::default(),
            max_chunks_per_clip: None,
            expand: true,
            filter_after_expansion: true,
            workers: default_workers(),
            generation: VideoFormat::GENERATION,
            expansion: VideoFormat::EXPANSION,
            mock: true,
            mock_flag_rate: default_flag_rate(),
            endpoints: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.render.validate()?;
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(w) = self.weathers.iter().find(|w| !seen.insert(**w)) {
            return Err(Error::Config(format!("weather {w} listed twice")));
        }
        if self.mock_flag_rate.1 == 0 || self.mock_flag_rate.0 > self.mock_flag_rate.1 {
            return Err(Error::Config("mock_flag_rate must be a fraction in [0, 1]".into()));
        }
        if !self.mock {
            let ep = self
                .endpoints
                .as_ref()
                .ok_or_else(|| Error::Config("endpoints required unless mock is set".into()))?;
            ep.rewriter.validate()?;
            ep.generator.validate()?;
            ep.judge.validate()?;
            match &ep.expander {
                Some(e) => e.validate()?,
                None if self.expand => {
                    return Err(Error::Config("expand is set but no expander endpoint is configured".into()))
                }
                None => {}
            }
        }
        Ok(())
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest
            .clone()
            .unwrap_or_else(|| self.output_dir.join("manifest.ndjson"))
    }
}
