//! HTTP JSON service backing the trajectory studio.
//!
//! | method | path | body / response |
//! |---|---|---|
//! | GET | `/api/clips` | `{"clips": [{"clip_id", "has_trajectory"}]}` |
//! | GET | `/api/clips/{id}/geometry` | map entities, object tracks, counts |
//! | GET | `/api/clips/{id}/ego_track` | `{"poses": [PoseRecord]}` |
//! | POST | `/api/clips/{id}/trajectory` | `TrajectorySpec` -> interpolated poses and kinematic report |
//! | GET | `/api/clips/{id}/trajectory` | persisted `TrajectorySpec` |
//! | POST | `/api/clips/{id}/preview` | [`PreviewRequest`] -> [`PreviewResponse`] |
//! | GET | `/api/previews/{chunk}` | `{"chunk", "frame_count"}` |
//! | GET | `/api/previews/{chunk}/frames/{i}` | PNG |
//!
//! Errors are `{"error": {"code", "message"}}` with a 4xx/5xx status.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dataset::{load_clip, write_file_atomic, RdsHqLayout};
use crate::error::Error;
use crate::render::output::{frame_file_name, write_png_frames};
use crate::render::{render_hdmap_video, ChunkName, RenderSpec, Weather, CHUNK_FRAMES};
use crate::scene::{validate_clip_id, Geometry, PoseRecord, SceneClip};
use crate::trajectory::{interpolate_trajectory, to_pose_records, validate_trajectory, TrajectoryLimits, TrajectorySpec};

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::InvalidInput(_) | Error::Config(_) | Error::Invariant(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid_input")
            }
            Error::OutOfRange { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "out_of_range"),
            Error::Precondition(_) => (StatusCode::UNPROCESSABLE_ENTITY, "precondition_failed"),
            Error::MissingAttribute { .. } => (StatusCode::NOT_FOUND, "missing_attribute"),
            Error::Parse { .. } | Error::Json(_) => (StatusCode::UNPROCESSABLE_ENTITY, "parse_error"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

pub struct ApiState {
    layout: RdsHqLayout,
    clips: RwLock<HashMap<String, Arc<SceneClip>>>,
    /// One lock per clip serializes trajectory writes.
    trajectory_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ApiState {
    pub fn new(layout: RdsHqLayout) -> Self {
        Self {
            layout,
            clips: RwLock::new(HashMap::new()),
            trajectory_locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn trajectory_path(&self, clip_id: &str) -> PathBuf {
        self.layout.root().join("trajectories").join(format!("{clip_id}.json"))
    }

    pub fn preview_dir(&self, chunk: &ChunkName) -> PathBuf {
        self.layout.root().join("previews").join(chunk.to_string())
    }

    fn clip(&self, clip_id: &str) -> ApiResult<Arc<SceneClip>> {
        validate_clip_id(clip_id).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_clip_id", e.to_string()))?;
        if let Some(c) = self.clips.read().unwrap().get(clip_id) {
            return Ok(c.clone());
        }
        if !self.layout.list_clips()?.iter().any(|c| c == clip_id) {
            return Err(ApiError::not_found(format!("clip {clip_id} not found")));
        }
        let clip = Arc::new(load_clip(&self.layout, clip_id)?);
        self.clips.write().unwrap().insert(clip_id.to_string(), clip.clone());
        Ok(clip)
    }

    fn trajectory_lock(&self, clip_id: &str) -> Arc<Mutex<()>> {
        self.trajectory_locks
            .lock()
            .unwrap()
            .entry(clip_id.to_string())
            .or_default()
            .clone()
    }

    fn saved_trajectory(&self, clip_id: &str) -> ApiResult<Option<TrajectorySpec>> {
        let path = self.trajectory_path(clip_id);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e).into()),
        };
        let spec = serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
        Ok(Some(spec))
    }
}

pub fn router(state: Arc<ApiState>) -> Router {
    Router::new()
        .route("/api/clips", get(list_clips))
        .route("/api/clips/{id}/geometry", get(geometry))
        .route("/api/clips/{id}/ego_track", get(ego_track))
        .route("/api/clips/{id}/trajectory", get(get_trajectory).post(post_trajectory))
        .route("/api/clips/{id}/preview", axum::routing::post(preview))
        .route("/api/previews/{chunk}", get(preview_info))
        .route("/api/previews/{chunk}/frames/{i}", get(preview_frame))
        .with_state(state)
}

/// Serves the API on `port` (all interfaces) until the process exits.
pub async fn serve_api(layout: RdsHqLayout, port: u16) -> std::io::Result<()> {
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("serving {} on http://{}", layout.root().display(), listener.local_addr()?);
    axum::serve(listener, router(Arc::new(ApiState::new(layout)))).await
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))
}

async fn list_clips(State(st): State<Arc<ApiState>>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let clips: Vec<Value> = st
            .layout
            .list_clips()?
            .into_iter()
            .map(|id| {
                let has = st.trajectory_path(&id).exists();
                json!({ "clip_id": id, "has_trajectory": has })
            })
            .collect();
        Ok(Json(json!({ "clips": clips })))
    })
    .await
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct GeometryCounts {
    pub polylines: usize,
    pub polygons: usize,
    pub cuboids: usize,
    pub object_tracks: usize,
}

async fn geometry(State(st): State<Arc<ApiState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let clip = st.clip(&id)?;
        let mut counts = GeometryCounts {
            object_tracks: clip.object_tracks().len(),
            ..Default::default()
        };
        for e in clip.map_entities() {
            match e.geometry() {
                Geometry::Polyline { .. } => counts.polylines += 1,
                Geometry::Polygon { .. } => counts.polygons += 1,
                Geometry::Cuboid(_) => counts.cuboids += 1,
            }
        }
        let (t0, t1) = clip.time_span();
        Ok(Json(json!({
            "clip_id": id,
            "time_span": [t0, t1],
            "map_entities": clip.map_entities(),
            "object_tracks": clip.object_tracks(),
            "counts": counts,
        })))
    })
    .await
}

async fn ego_track(State(st): State<Arc<ApiState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let clip = st.clip(&id)?;
        let poses: Vec<PoseRecord> = clip.ego_pose_track().iter().map(PoseRecord::from).collect();
        Ok(Json(json!({ "clip_id": id, "poses": poses })))
    })
    .await
}

async fn post_trajectory(
    State(st): State<Arc<ApiState>>,
    UrlPath(id): UrlPath<String>,
    body: axum::body::Bytes,
) -> ApiResult<Json<Value>> {
    let spec: TrajectorySpec = parse_body(&body)?;
    blocking(move || {
        st.clip(&id)?;
        let poses = interpolate_trajectory(&spec)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_trajectory", e.to_string()))?;
        let report = validate_trajectory(&poses, spec.fps, &TrajectoryLimits::default());
        let bytes = serde_json::to_vec_pretty(&spec).map_err(Error::from)?;
        {
            let lock = st.trajectory_lock(&id);
            let _guard = lock.lock().unwrap();
            write_file_atomic(&st.trajectory_path(&id), &bytes)?;
        }
        Ok(Json(json!({
            "clip_id": id,
            "spec": spec,
            "trajectory": to_pose_records(&poses),
            "report": report,
        })))
    })
    .await
}

async fn get_trajectory(State(st): State<Arc<ApiState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<TrajectorySpec>> {
    blocking(move || {
        st.clip(&id)?;
        st.saved_trajectory(&id)?
            .map(Json)
            .ok_or_else(|| ApiError::not_found(format!("no trajectory saved for {id}")))
    })
    .await
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreviewRequest {
    pub weather: Weather,
    /// Overrides the saved trajectory; without either the logged track is
    /// used.
    #[serde(default)]
    pub trajectory: Option<TrajectorySpec>,
    #[serde(default)]
    pub camera: Option<String>,
    #[serde(default)]
    pub width: Option<u32>,
    #[serde(default)]
    pub height: Option<u32>,
    /// Defaults to one chunk, or fewer when the track is shorter.
    #[serde(default)]
    pub frame_count: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviewResponse {
    pub chunk: ChunkName,
    pub frame_count: u32,
    pub frames: Vec<String>,
}

fn render_preview(st: &ApiState, id: &str, req: PreviewRequest) -> ApiResult<PreviewResponse> {
    let clip = st.clip(id)?;
    let spec = match req.trajectory {
        Some(s) => Some(s),
        None => st.saved_trajectory(id)?,
    };
    let clip: Arc<SceneClip> = match spec {
        Some(s) => {
            let poses = interpolate_trajectory(&s)
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_trajectory", e.to_string()))?;
            Arc::new(clip.with_ego_track(poses)?)
        }
        None => clip,
    };
    let mut rs = RenderSpec::default();
    if let Some(c) = req.camera {
        rs.camera = c;
    }
    rs.width = req.width.unwrap_or(rs.width);
    rs.height = req.height.unwrap_or(rs.height);
    let (t0, t1) = clip.time_span();
    let available = ((t1 - t0) * rs.fps + 1e-9).floor() as u32 + 1;
    rs.frame_count = req.frame_count.unwrap_or(available.min(CHUNK_FRAMES as u32));
    let frames = render_hdmap_video(&clip, &rs)?;

    let chunk = ChunkName::new(id, 0, req.weather)?;
    let dir = st.preview_dir(&chunk);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    write_png_frames(&dir, &frames)?;
    let urls = (0..frames.len())
        .map(|i| format!("/api/previews/{chunk}/frames/{i}"))
        .collect();
    Ok(PreviewResponse {
        chunk,
        frame_count: frames.len() as u32,
        frames: urls,
    })
}

async fn preview(
    State(st): State<Arc<ApiState>>,
    UrlPath(id): UrlPath<String>,
    body: axum::body::Bytes,
) -> ApiResult<Json<PreviewResponse>> {
    let req: PreviewRequest = parse_body(&body)?;
    blocking(move || render_preview(&st, &id, req).map(Json)).await
}

fn preview_chunk(st: &ApiState, chunk: &str) -> ApiResult<(ChunkName, PathBuf)> {
    let name: ChunkName = chunk
        .parse()
        .map_err(|e: Error| ApiError::new(StatusCode::BAD_REQUEST, "invalid_chunk_name", e.to_string()))?;
    let dir = st.preview_dir(&name);
    if !dir.is_dir() {
        return Err(ApiError::not_found(format!("no preview {name}")));
    }
    Ok((name, dir))
}

fn count_frames(dir: &Path) -> ApiResult<u32> {
    let mut n = 0;
    while dir.join(frame_file_name(n)).exists() {
        n += 1;
    }
    Ok(n)
}

async fn preview_info(State(st): State<Arc<ApiState>>, UrlPath(chunk): UrlPath<String>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let (name, dir) = preview_chunk(&st, &chunk)?;
        Ok(Json(json!({ "chunk": name, "frame_count": count_frames(&dir)? })))
    })
    .await
}

async fn preview_frame(
    State(st): State<Arc<ApiState>>,
    UrlPath((chunk, i)): UrlPath<(String, u32)>,
) -> ApiResult<Response> {
    blocking(move || {
        let (name, dir) = preview_chunk(&st, &chunk)?;
        let path = dir.join(frame_file_name(i));
        match std::fs::read(&path) {
            Ok(bytes) => Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(ApiError::not_found(format!("{name} has no frame {i}")))
            }
            Err(e) => Err(Error::io(&path, e).into()),
        }
    })
    .await
}
