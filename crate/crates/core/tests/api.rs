mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use sdg_core::api::{router, ApiState};
use sdg_core::dataset::RdsHqLayout;

struct Fixture {
    _dir: tempfile::TempDir,
    app: Router,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    common::write_layout(dir.path(), &common::all_fixtures());
    let app = router(Arc::new(ApiState::new(RdsHqLayout::new(dir.path()))));
    Fixture { _dir: dir, app }
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&b).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

async fn call_json(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn keyframe(frame: u32, x: f64) -> Value {
    json!({ "frame_index": frame, "translation": [x, 0.0, 0.0], "quaternion": [1.0, 0.0, 0.0, 0.0] })
}

#[tokio::test]
async fn lists_clips() {
    let f = fixture();
    let (status, v) = call_json(&f.app, Method::GET, "/api/clips", None).await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = v["clips"].as_array().unwrap().iter().map(|c| c["clip_id"].as_str().unwrap()).collect();
    assert_eq!(ids.len(), 4);
    for id in ["fixture-a", "fixture-b", "fixture-lidar", "fixture-empty"] {
        assert!(ids.contains(&id), "{id} missing from {ids:?}");
    }
    assert!(v["clips"].as_array().unwrap().iter().all(|c| c["has_trajectory"] == false));
}

#[tokio::test]
async fn geometry_counts_match_fixture() {
    let f = fixture();
    let (status, v) = call_json(&f.app, Method::GET, "/api/clips/fixture-a/geometry", None).await;
    assert_eq!(status, StatusCode::OK);
    let (pl, pg, cu) = common::FIXTURE_MAP_COUNTS;
    assert_eq!(v["counts"]["polylines"], pl);
    assert_eq!(v["counts"]["polygons"], pg);
    assert_eq!(v["counts"]["cuboids"], cu);
    assert_eq!(v["counts"]["object_tracks"], common::FIXTURE_OBJECT_TRACKS);
    assert_eq!(v["map_entities"].as_array().unwrap().len(), pl + pg + cu);
    assert_eq!(v["time_span"], json!([0.0, 4.5]));

    let (status, v) = call_json(&f.app, Method::GET, "/api/clips/fixture-empty/geometry", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["counts"], json!({ "polylines": 0, "polygons": 0, "cuboids": 0, "object_tracks": 0 }));
}

#[tokio::test]
async fn ego_track_is_served() {
    let f = fixture();
    let (status, v) = call_json(&f.app, Method::GET, "/api/clips/fixture-a/ego_track", None).await;
    assert_eq!(status, StatusCode::OK);
    let poses = v["poses"].as_array().unwrap();
    assert_eq!(poses.len(), 46);
    assert_eq!(poses[10]["translation"], json!([5.0, 0.0, 0.0]));
}

#[tokio::test]
async fn unknown_and_bad_clip_ids() {
    let f = fixture();
    let (status, v) = call_json(&f.app, Method::GET, "/api/clips/nope/geometry", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(v["error"]["code"].is_string());
    assert!(v["error"]["message"].as_str().unwrap().contains("nope"));

    let (status, v) = call_json(&f.app, Method::GET, "/api/clips/..%2Fetc/geometry", None).await;
    assert!(status.is_client_error(), "{status}");
    assert!(v["error"]["code"].is_string());
}

#[tokio::test]
async fn trajectory_round_trip() {
    let f = fixture();
    let spec = json!({
        "keyframes": [keyframe(0, 0.0), keyframe(60, 20.0)],
        "fps": 30.0,
        "total_frames": 121,
    });
    let (status, v) = call_json(&f.app, Method::POST, "/api/clips/fixture-a/trajectory", Some(spec)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let traj = v["trajectory"].as_array().unwrap();
    assert_eq!(traj.len(), 121);
    assert_eq!(traj[60]["translation"], json!([20.0, 0.0, 0.0]));
    assert!(v["report"]["violations"].as_array().unwrap().is_empty());

    let (status, saved) = call_json(&f.app, Method::GET, "/api/clips/fixture-a/trajectory", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(saved["keyframes"], v["spec"]["keyframes"]);

    let (_, list) = call_json(&f.app, Method::GET, "/api/clips", None).await;
    let a = list["clips"].as_array().unwrap().iter().find(|c| c["clip_id"] == "fixture-a").unwrap();
    assert_eq!(a["has_trajectory"], true);
}

#[tokio::test]
async fn trajectory_errors() {
    let f = fixture();
    let one = json!({ "keyframes": [keyframe(0, 0.0)], "total_frames": 121 });
    let (status, v) = call_json(&f.app, Method::POST, "/api/clips/fixture-a/trajectory", Some(one)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "invalid_trajectory");

    let (status, v) = call_json(&f.app, Method::POST, "/api/clips/fixture-a/trajectory", None).await;
    assert!(status.is_client_error());
    assert!(v["error"]["code"].is_string());

    let (status, _) = call_json(&f.app, Method::GET, "/api/clips/fixture-b/trajectory", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn preview_render_and_fetch() {
    let f = fixture();
    let req = json!({ "weather": "foggy", "width": 160, "height": 88, "frame_count": 5 });
    let (status, v) = call_json(&f.app, Method::POST, "/api/clips/fixture-a/preview", Some(req)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["chunk"], "fixture-a_0_foggy");
    assert_eq!(v["frame_count"], 5);

    let (status, info) = call_json(&f.app, Method::GET, "/api/previews/fixture-a_0_foggy", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(info["frame_count"], 5);

    let url = v["frames"][4].as_str().unwrap();
    let (status, png) = call(&f.app, Method::GET, url, None).await;
    assert_eq!(status, StatusCode::OK);
    let img = image::load_from_memory(&png).unwrap();
    assert_eq!((img.width(), img.height()), (160, 88));

    let (status, _) = call(&f.app, Method::GET, "/api/previews/fixture-a_0_foggy/frames/5", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, v) = call_json(&f.app, Method::GET, "/api/previews/not-a-chunk", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "invalid_chunk_name");
}

#[tokio::test]
async fn preview_uses_saved_trajectory_and_defaults() {
    let f = fixture();
    // 4.5 s at 30 fps is 136 frames available; one chunk is rendered.
    let (status, v) = call_json(
        &f.app,
        Method::POST,
        "/api/clips/fixture-a/preview",
        Some(json!({ "weather": "night", "width": 64, "height": 36 })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["frame_count"], 121);

    let spec = json!({ "keyframes": [keyframe(0, 0.0), keyframe(20, 5.0)], "total_frames": 21 });
    call_json(&f.app, Method::POST, "/api/clips/fixture-a/trajectory", Some(spec)).await;
    let (status, v) = call_json(
        &f.app,
        Method::POST,
        "/api/clips/fixture-a/preview",
        Some(json!({ "weather": "night", "width": 64, "height": 36 })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["frame_count"], 21);
}
