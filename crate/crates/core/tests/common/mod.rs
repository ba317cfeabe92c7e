//! Shared fixtures: a synthetic urban clip, a moving-ego LiDAR scan with
//! known beam/column truth, and a naive range-map encoder to compare with.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};
use std::path::Path;

use sdg_core::camera::{CameraModel, FThetaIntrinsics, Intrinsics, PinholeIntrinsics};
use sdg_core::dataset::{save_clips, RdsHqLayout};
use sdg_core::lidar::{sensor_pose, FrameTag, SensorModel, Sweep};
use sdg_core::scene::{
    Cuboid, CuboidState, Geometry, MapClass, MapEntity, ObjectCategory, ObjectTrack, Pose, Quaternion,
    RigidTransform, SceneClip, SceneClipParts, Vec3,
};

pub const FPS: f64 = 30.0;

/// Ego driving along a circular arc: speed `v` m/s, yaw rate `w` rad/s,
/// poses every `1/hz` s over `[t0, t1]`.
pub fn arc_track(t0: f64, t1: f64, hz: f64, v: f64, w: f64) -> Vec<Pose> {
    let n = ((t1 - t0) * hz).round() as usize;
    (0..=n)
        .map(|i| {
            let t = if i == n { t1 } else { t0 + i as f64 / hz };
            let s = t - t0;
            let (x, y) = if w.abs() < 1e-12 {
                (v * s, 0.0)
            } else {
                (v / w * (w * s).sin(), v / w * (1.0 - (w * s).cos()))
            };
            Pose::new(Vec3::new(x, y, 0.0), Quaternion::from_yaw(w * s), t)
        })
        .collect()
}

/// Ego (x forward, y left, z up) to OpenCV camera (x right, y down, z
/// forward), camera mounted at `pos` in the ego frame.
pub fn forward_camera_extrinsics(pos: Vec3) -> RigidTransform {
    let r = [[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]];
    let q = Quaternion::from_matrix(&r);
    let t = q.rotate(pos);
    RigidTransform::new(Vec3::new(-t.x, -t.y, -t.z), q)
}

pub fn front_camera() -> CameraModel {
    let k = PinholeIntrinsics {
        fx: 1000.0,
        fy: 1000.0,
        cx: 640.0,
        cy: 352.0,
        width: 1280,
        height: 704,
    };
    CameraModel::new("front", Intrinsics::Pinhole(k), forward_camera_extrinsics(Vec3::new(1.5, 0.0, 1.6))).unwrap()
}

pub fn fisheye_camera() -> CameraModel {
    let k = FThetaIntrinsics {
        cx: 640.0,
        cy: 352.0,
        width: 1280,
        height: 704,
        k: [420.0, 0.0, -8.0, 0.0, 0.0],
        max_fov_half_angle: 100f64.to_radians(),
    };
    CameraModel::new("fisheye", Intrinsics::FTheta(k), forward_camera_extrinsics(Vec3::new(2.0, 0.0, 1.2))).unwrap()
}

fn polyline(id: &str, class: MapClass, pts: &[(f64, f64, f64)]) -> MapEntity {
    let vertices = pts.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
    MapEntity::new(id, class, Geometry::Polyline { vertices }).unwrap()
}

fn polygon(id: &str, class: MapClass, pts: &[(f64, f64, f64)]) -> MapEntity {
    let vertices = pts.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
    MapEntity::new(id, class, Geometry::Polygon { vertices }).unwrap()
}

fn cuboid(center: Vec3, yaw: f64, dims: Vec3) -> Cuboid {
    Cuboid::new(RigidTransform::new(center, Quaternion::from_yaw(yaw)), dims).unwrap()
}

/// Straight multi-lane road with a crosswalk, signals and poles.
pub fn fixture_map() -> Vec<MapEntity> {
    let mut m = Vec::new();
    for (i, y) in [-5.25, 5.25].iter().enumerate() {
        m.push(polyline(&format!("boundary_{i}"), MapClass::RoadBoundary, &[(-20.0, *y, 0.0), (60.0, *y, 0.0), (160.0, *y, 0.0)]));
    }
    for (i, y) in [-1.75, 1.75].iter().enumerate() {
        m.push(polyline(&format!("lane_line_{i}"), MapClass::LaneLine, &[(-20.0, *y, 0.0), (160.0, *y, 0.0)]));
    }
    for (i, y) in [-3.5, 0.0, 3.5].iter().enumerate() {
        m.push(polyline(&format!("lane_{i}"), MapClass::Lane, &[(-20.0, *y, 0.0), (160.0, *y, 0.0)]));
    }
    m.push(polyline("wait_line_0", MapClass::WaitLine, &[(38.0, -5.25, 0.0), (38.0, 0.0, 0.0)]));
    for (i, y) in [-7.0, 7.0].iter().enumerate() {
        m.push(polyline(&format!("pole_{i}"), MapClass::Pole, &[(46.0, *y, 0.0), (46.0, *y, 6.0)]));
    }
    m.push(polygon(
        "crosswalk_0",
        MapClass::Crosswalk,
        &[(40.0, -5.25, 0.0), (44.0, -5.25, 0.0), (44.0, 5.25, 0.0), (40.0, 5.25, 0.0)],
    ));
    m.push(polygon(
        "marking_0",
        MapClass::RoadMarking,
        &[(20.0, -0.3, 0.0), (24.0, -0.3, 0.0), (25.0, 0.0, 0.0), (24.0, 0.3, 0.0), (20.0, 0.3, 0.0)],
    ));
    m.push(
        MapEntity::new(
            "light_0",
            MapClass::TrafficLight,
            Geometry::Cuboid(cuboid(Vec3::new(46.0, -7.0, 6.5), 0.0, Vec3::new(0.4, 0.4, 1.0))),
        )
        .unwrap(),
    );
    m.push(
        MapEntity::new(
            "sign_0",
            MapClass::TrafficSign,
            Geometry::Cuboid(cuboid(Vec3::new(70.0, 7.0, 2.5), 0.0, Vec3::new(0.1, 0.8, 0.8))),
        )
        .unwrap(),
    );
    m
}

/// (polylines, polygons, cuboids) in [`fixture_map`].
pub const FIXTURE_MAP_COUNTS: (usize, usize, usize) = (10, 2, 2);
pub const FIXTURE_OBJECT_TRACKS: usize = 3;

fn moving_track(id: &str, cat: ObjectCategory, t0: f64, t1: f64, start: Vec3, vel: Vec3, dims: Vec3) -> ObjectTrack {
    let n = ((t1 - t0) * 10.0).round() as usize;
    let yaw = vel.y.atan2(vel.x);
    let states = (0..=n)
        .map(|i| {
            let t = if i == n { t1 } else { t0 + i as f64 / 10.0 };
            let c = start + vel.scale(t - t0);
            CuboidState {
                timestamp: t,
                cuboid: cuboid(c, yaw, dims),
            }
        })
        .collect();
    ObjectTrack::new(id, cat, states).unwrap()
}

/// A clip of `seconds` length driving straight down the fixture road.
pub fn fixture_clip(clip_id: &str, seconds: f64) -> SceneClip {
    let (t0, t1) = (0.0, seconds);
    let objects = vec![
        moving_track("car_0", ObjectCategory::Automobile, t0, t1, Vec3::new(18.0, 0.0, 0.8), Vec3::new(6.0, 0.0, 0.0), Vec3::new(4.5, 1.9, 1.6)),
        moving_track("truck_0", ObjectCategory::HeavyTruck, t0, t1, Vec3::new(55.0, 3.5, 1.7), Vec3::ZERO, Vec3::new(9.0, 2.5, 3.4)),
        moving_track("person_0", ObjectCategory::Person, t0, t1, Vec3::new(42.0, -5.0, 0.9), Vec3::new(0.0, 1.2, 0.0), Vec3::new(0.6, 0.6, 1.8)),
    ];
    let mut attributes = std::collections::BTreeMap::new();
    attributes.insert("weather".to_string(), "sunny".to_string());
    attributes.insert("time_of_day".to_string(), "day".to_string());
    SceneClip::new(SceneClipParts {
        clip_id: clip_id.to_string(),
        map_entities: fixture_map(),
        object_tracks: objects,
        ego_pose_track: arc_track(t0, t1, 10.0, 5.0, 0.0),
        camera_rig: vec![front_camera(), fisheye_camera()],
        lidar_sweeps: None,
        caption: "A sunny urban road with a car ahead, a parked truck and a pedestrian on the crosswalk.".into(),
        attributes,
    })
    .unwrap()
}

/// Fixture clip with two LiDAR sweeps.
pub fn fixture_clip_with_lidar(clip_id: &str) -> SceneClip {
    let mut parts = fixture_clip(clip_id, 2.0).into_parts();
    let sensor = SensorModel::synthetic_zigzag(32, 256);
    let sweeps = [0.0, 1.0]
        .iter()
        .map(|&t| synthetic_scan(&sensor, &parts.ego_pose_track, t).sweep)
        .collect();
    parts.lidar_sweeps = Some(sweeps);
    SceneClip::new(parts).unwrap()
}

/// A clip with nothing but an ego track.
pub fn empty_clip(clip_id: &str) -> SceneClip {
    SceneClip::new(SceneClipParts {
        clip_id: clip_id.to_string(),
        ego_pose_track: arc_track(0.0, 1.0, 10.0, 2.0, 0.1),
        camera_rig: vec![front_camera()],
        ..Default::default()
    })
    .unwrap()
}

pub fn all_fixtures() -> Vec<SceneClip> {
    vec![
        fixture_clip("fixture-a", 4.5),
        fixture_clip("fixture-b", 8.1),
        fixture_clip_with_lidar("fixture-lidar"),
        empty_clip("fixture-empty"),
    ]
}

pub fn write_layout(root: &Path, clips: &[SceneClip]) -> RdsHqLayout {
    let layout = RdsHqLayout::new(root);
    save_clips(&layout, clips).unwrap();
    layout
}

pub struct SyntheticScan {
    pub sweep: Sweep,
    /// Beam row and column that produced each point.
    pub truth: Vec<(usize, usize)>,
}

/// Smooth synthetic scene depth along a ray.
fn scene_range(row: usize, phi: f64) -> f64 {
    12.0 + 6.0 * (0.5 + 0.5 * (3.0 * phi).sin()) + 0.03 * row as f64
}

/// Fires every beam of every column at its true emission time while the
/// ego moves along `track`, then motion-compensates the returns into the
/// world frame.
pub fn synthetic_scan(sensor: &SensorModel, track: &[Pose], start: f64) -> SyntheticScan {
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for col in 0..sensor.width() {
        let a = (col as f64 + 0.5) * TAU / sensor.columns as f64;
        let t = start + a / TAU * sensor.spin_period;
        let world_from_sensor = sensor_pose(track, sensor, t).unwrap();
        for (row, &theta) in sensor.elevation_profile.iter().enumerate() {
            let phi = a + sensor.azimuth_profile[row];
            let r = scene_range(row, phi);
            let local = Vec3::new(r * theta.cos() * phi.cos(), r * theta.cos() * phi.sin(), r * theta.sin());
            points.push(world_from_sensor.apply(local));
            truth.push((row, col));
        }
    }
    SyntheticScan {
        sweep: Sweep::new(points, FrameTag::World, start),
        truth,
    }
}

/// Encoder that ignores per-beam profiles and motion: every point is taken
/// relative to the sweep-start sensor pose, rows come from a uniform
/// elevation grid and columns from the raw azimuth.
pub fn naive_cells(sensor: &SensorModel, track: &[Pose], sweep: &Sweep) -> Vec<(usize, usize)> {
    let inv = sensor_pose(track, sensor, sweep.sweep_start_time).unwrap().inverse();
    let e = &sensor.elevation_profile;
    let (top, bottom) = (e[0], e[e.len() - 1]);
    let step = (top - bottom) / (e.len() - 1) as f64;
    let w = sensor.columns as f64;
    sweep
        .points
        .iter()
        .map(|&p| {
            let q = inv.apply(p);
            let r = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
            let theta = (q.z / r).asin();
            let phi = q.y.atan2(q.x).rem_euclid(TAU);
            let row = ((top - theta) / step).round().clamp(0.0, (e.len() - 1) as f64) as usize;
            let col = ((phi / TAU * w).floor() as usize).min(sensor.width() - 1);
            (row, col)
        })
        .collect()
}

/// Angle helper for tests.
pub fn wrap_pi(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}
