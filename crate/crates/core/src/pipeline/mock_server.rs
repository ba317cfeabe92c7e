//! HTTP stand-in for the model services, speaking the same wire protocol as
//! [`HttpService`](super::clients::HttpService). Jobs complete immediately.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use super::clients::{
    mock_artifact_uri, mock_job_id, mock_rewrite, GenerationRequest, JobStatus, JudgeBody, MockJudge, RewriteBody,
    VideoJudge,
};

pub fn mock_router(judge: MockJudge) -> Router {
    Router::new()
        .route("/v1/rewrite", post(rewrite))
        .route("/v1/jobs", post(submit))
        .route("/v1/jobs/{id}", get(status))
        .route("/v1/judge", post(judge_video))
        .with_state(Arc::new(judge))
}

async fn rewrite(Json(body): Json<RewriteBody>) -> Result<Json<Value>, (StatusCode, String)> {
    if body.caption.trim().is_empty() {
        return Err((StatusCode::BAD_REQUEST, "empty caption".into()));
    }
    Ok(Json(json!({ "prompt": mock_rewrite(&body.caption, body.target) })))
}

async fn submit(Json(req): Json<GenerationRequest>) -> Json<Value> {
    Json(json!({ "job_id": mock_job_id(&req) }))
}

async fn status(Path(id): Path<String>) -> Json<JobStatus> {
    Json(JobStatus::Done {
        artifact_uri: mock_artifact_uri(&id),
    })
}

async fn judge_video(
    State(judge): State<Arc<MockJudge>>,
    Json(body): Json<JudgeBody>,
) -> Result<Json<Value>, (StatusCode, String)> {
    let r = judge
        .judge(&body.system_prompt, &body.chunk, &body.video_uri)
        .map_err(|e| (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(serde_json::to_value(r).expect("judge response serializes")))
}

/// Serves the mock router on `addr` until the process exits.
pub async fn serve_mock(addr: SocketAddr, judge: MockJudge) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("mock services on http://{}", listener.local_addr()?);
    axum::serve(listener, mock_router(judge)).await
}

/// Starts the mock server on an ephemeral port in a background thread and
/// returns its base URL.
pub fn spawn_mock(judge: MockJudge) -> std::io::Result<String> {
    let std_listener = std::net::TcpListener::bind("127.0.0.1:0")?;
    std_listener.set_nonblocking(true)?;
    let addr = std_listener.local_addr()?;
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .expect("tokio runtime");
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener");
            let _ = axum::serve(listener, mock_router(judge)).await;
        });
    });
    Ok(format!("http://{addr}"))
}
