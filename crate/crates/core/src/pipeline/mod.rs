//! End-to-end synthetic data generation: condition rendering, prompt
//! rewriting, generation, expansion and rejection sampling, tracked in an
//! append-only manifest.

mod clients;
mod config;
mod mix;
mod mock_server;
mod prompts;
mod run;

pub use clients::{
    fnv1a, mock_artifact_uri, mock_job_id, mock_rewrite, GenerationRequest, HttpService, JobKind, JobStatus,
    JudgeBody, JudgeResponse, MockGenerator, MockJudge, MockRewriter, PromptRewriter, RewriteBody, VideoGenerator,
    VideoJudge,
};
pub use config::{EndpointConfig, Endpoints, PipelineConfig, RetryPolicy, VideoFormat};
pub use mix::*;
pub use mock_server::{mock_router, serve_mock, spawn_mock};
pub use prompts::{REJECTION_SYSTEM_PROMPT, REWRITER_SYSTEM_PROMPT};
pub use run::{
    clip_chunk_count, manifest_stats, rewrite_prompts, run_pipeline, run_rejection_sampling, stage_order, Clock,
    FixedClock, PipelineReport, RejectionReport, RewriteResult, RunOptions, Services, SystemClock, Verdict,
};
