mod common;

use std::path::Path;
use std::process::{Command, Output};

use sdg_core::lidar::SensorModel;
use sdg_core::pipeline::PipelineConfig;
use sdg_core::render::{RenderSpec, Weather};

fn sdg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdg"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap_or(serde_json::Value::Null)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn render_pngs_and_raw() {
    let tmp = tempfile::tempdir().unwrap();
    let layout = tmp.path().join("layout");
    common::write_layout(&layout, &[common::fixture_clip("clip-a", 4.5)]);
    let mut spec = RenderSpec::default();
    spec.width = 128;
    spec.height = 72;
    let spec_path = tmp.path().join("spec.json");
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();

    let frames = tmp.path().join("frames");
    let args = ["render", "--layout", p(&layout), "--clip", "clip-a", "--out", p(&frames), "--spec", p(&spec_path), "--frames", "3"];
    ok(&sdg(&args));
    let mut names: Vec<String> = std::fs::read_dir(&frames)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 3, "{names:?}");
    assert!(names.iter().all(|n| n.ends_with(".png")));

    let raw = tmp.path().join("video");
    ok(&sdg(&[
        "render", "--layout", p(&layout), "--clip", "clip-a", "--out", p(&raw), "--spec", p(&spec_path), "--frames", "2",
        "--raw",
    ]));
    let rgb_len: u64 = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|f| f.file_name().unwrap().to_str().unwrap().starts_with("video") && f.extension().is_some_and(|x| x == "rgb"))
        .map(|f| std::fs::metadata(f).unwrap().len())
        .sum();
    assert_eq!(rgb_len, 2 * 128 * 72 * 3);
}

#[test]
fn missing_clip_fails() {
    let tmp = tempfile::tempdir().unwrap();
    common::write_layout(tmp.path(), &[common::fixture_clip("clip-a", 4.5)]);
    let out = sdg(&["render", "--layout", p(tmp.path()), "--clip", "nope", "--out", p(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn lidar_encode_decode_normalize() {
    let tmp = tempfile::tempdir().unwrap();
    let layout = tmp.path().join("layout");
    common::write_layout(&layout, &[common::fixture_clip_with_lidar("lidar")]);
    let sensor = tmp.path().join("sensor.json");
    std::fs::write(&sensor, serde_json::to_string(&SensorModel::synthetic_zigzag(32, 256)).unwrap()).unwrap();

    let stem = tmp.path().join("map0");
    let stats = ok(&sdg(&["lidar", "encode", "--layout", p(&layout), "--clip", "lidar", "--sensor", p(&sensor), "--out", p(&stem)]));
    assert_eq!(stats["collisions"], 0);
    assert_eq!(stats["encoded"], 32 * 256);

    let blob = tmp.path().join("sweep.bin");
    ok(&sdg(&["lidar", "decode", "--input", p(&stem), "--layout", p(&layout), "--clip", "lidar", "--out", p(&blob)]));
    let sweeps = sdg_core::lidar::io::decode_sweeps(&std::fs::read(&blob).unwrap(), "sweep.bin").unwrap();
    assert_eq!(sweeps[0].points.len(), 32 * 256);

    let out_dir = tmp.path().join("norm");
    let v = ok(&sdg(&["lidar", "normalize", "--inputs", p(&stem), "--out-dir", p(&out_dir)]));
    assert!(v["clip_lo"].as_f64().unwrap() < v["clip_hi"].as_f64().unwrap());
    let n = sdg_core::lidar::io::read_normalized(&out_dir.join("map0")).unwrap();
    assert_eq!((n.height, n.width), (128, 256));

    let v = ok(&sdg(&["lidar", "normalize", "--inputs", p(&stem), "--out-dir", p(&out_dir), "--clip-lo", "1", "--clip-hi", "80"]));
    assert_eq!(v["clip_lo"], 1.0);
}

#[test]
fn pipeline_run_resume_stats_mix() {
    let tmp = tempfile::tempdir().unwrap();
    let layout = tmp.path().join("layout");
    common::write_layout(&layout, &[common::fixture_clip("clip-a", 4.5), common::fixture_clip("clip-b", 4.5)]);
    let mut cfg = PipelineConfig::new(&layout, tmp.path().join("out"));
    cfg.render.width = 64;
    cfg.render.height = 36;
    cfg.weathers = vec![Weather::Sunny, Weather::Snowy];
    let cfg_path = tmp.path().join("pipeline.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();

    let v = ok(&sdg(&["pipeline", "run", "--config", p(&cfg_path)]));
    assert_eq!(v["failures"], serde_json::json!({}));
    assert_eq!(v["stats"]["entries"], 4);
    let v = ok(&sdg(&["pipeline", "resume", "--config", p(&cfg_path)]));
    assert_eq!(v["appended"], 0);

    let manifest = cfg.manifest_path();
    let v = ok(&sdg(&["pipeline", "stats", "--manifest", p(&manifest)]));
    assert_eq!(v["stats"]["entries"], 4);

    let v = ok(&sdg(&["mix", "--manifest", p(&manifest), "--layout", p(&layout), "--ratio", "1", "--seed", "3"]));
    assert_eq!(v["requested_synthetic"], 2);
    assert_eq!(v["items"].as_array().unwrap().len(), 4);
}

#[test]
fn bad_config_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, "{ \"layout\": 3 }").unwrap();
    let out = sdg(&["pipeline", "run", "--config", p(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));
}
