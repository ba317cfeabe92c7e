//! Keyframe-based ego trajectory authoring.
//!
//! Positions follow a cubic Hermite spline in frame index with Catmull-Rom
//! tangents; rotations are slerped between neighboring keyframes.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Pose, PoseRecord, Quaternion, Vec3};

pub const DEFAULT_FPS: f64 = 30.0;

/// A recorded pose at a frame index, or at a time converted with the
/// trajectory's fps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_index: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    pub translation: Vec3,
    #[serde(rename = "quaternion")]
    pub rotation: Quaternion,
}

impl Keyframe {
    pub fn at_frame(frame_index: u32, translation: Vec3, rotation: Quaternion) -> Self {
        Self {
            frame_index: Some(frame_index),
            time: None,
            translation,
            rotation,
        }
    }

    pub fn at_time(time: f64, translation: Vec3, rotation: Quaternion) -> Self {
        Self {
            frame_index: None,
            time: Some(time),
            translation,
            rotation,
        }
    }

    /// Frame index, resolving `time` (relative to the trajectory start) when
    /// no index is given. Times must land on a frame within 1e-6 frames.
    pub fn resolve_index(&self, fps: f64) -> Result<u32> {
        let from_time = |t: f64| -> Result<u32> {
            let f = t * fps;
            let r = f.round();
            if !f.is_finite() || r < 0.0 || r > u32::MAX as f64 || (f - r).abs() > 1e-6 {
                return Err(Error::Config(format!("keyframe time {t} is not on a frame at {fps} fps")));
            }
            Ok(r as u32)
        };
        match (self.frame_index, self.time) {
            (Some(i), None) => Ok(i),
            (None, Some(t)) => from_time(t),
            (Some(i), Some(t)) => {
                if from_time(t)? != i {
                    return Err(Error::Config(format!("keyframe time {t} disagrees with frame index {i}")));
                }
                Ok(i)
            }
            (None, None) => Err(Error::Config("keyframe needs frame_index or time".into())),
        }
    }
}

fn default_fps() -> f64 {
    DEFAULT_FPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub keyframes: Vec<Keyframe>,
    #[serde(default = "default_fps")]
    pub fps: f64,
    pub total_frames: u32,
    #[serde(default, rename = "loop")]
    pub looped: bool,
    /// Timestamp of frame 0.
    #[serde(default)]
    pub start_time: f64,
}

struct Knot {
    f: f64,
    p: Vec3,
    q: Quaternion,
}

impl TrajectorySpec {
    pub fn new(keyframes: Vec<Keyframe>, total_frames: u32) -> Self {
        Self {
            keyframes,
            fps: DEFAULT_FPS,
            total_frames,
            looped: false,
            start_time: 0.0,
        }
    }

    /// Checks the spec and returns keyframe indices.
    pub fn validate(&self) -> Result<Vec<u32>> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if !self.start_time.is_finite() {
            return Err(Error::Config("start_time must be finite".into()));
        }
        if self.keyframes.len() < 2 {
            return Err(Error::Config(format!(
                "need at least 2 keyframes, got {}",
                self.keyframes.len()
            )));
        }
        let idx = self
            .keyframes
            .iter()
            .map(|k| k.resolve_index(self.fps))
            .collect::<Result<Vec<_>>>()?;
        for w in idx.windows(2) {
            if w[1] == w[0] {
                return Err(Error::Config(format!("duplicate keyframe index {}", w[0])));
            }
            if w[1] < w[0] {
                return Err(Error::Config("keyframe indices must be strictly increasing".into()));
            }
        }
        let last = *idx.last().unwrap();
        if self.total_frames <= last {
            return Err(Error::Config(format!(
                "total_frames {} must exceed last keyframe index {last}",
                self.total_frames
            )));
        }
        for k in &self.keyframes {
            if !k.translation.is_finite() {
                return Err(Error::Config("keyframe translation not finite".into()));
            }
            k.rotation.check_unit().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(idx)
    }
}

fn hermite(p0: Vec3, m0: Vec3, p1: Vec3, m1: Vec3, span: f64, s: f64) -> Vec3 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    p0.scale(h00) + m0.scale(h10 * span) + p1.scale(h01) + m1.scale(h11 * span)
}

/// One pose per frame, `total_frames` long. Keyframe translations and
/// rotations are reproduced exactly at their indices. Without `loop`,
/// frames outside the keyframe range hold the nearest keyframe; with it,
/// the path closes from the last keyframe back to the first.
pub fn interpolate_trajectory(spec: &TrajectorySpec) -> Result<Vec<Pose>> {
    let idx = spec.validate()?;
    let n = idx.len();
    let period = spec.total_frames as f64;
    let mut knots: Vec<Knot> = Vec::with_capacity(n + 2);
    if spec.looped {
        let k = &spec.keyframes[n - 1];
        knots.push(Knot {
            f: idx[n - 1] as f64 - period,
            p: k.translation,
            q: k.rotation,
        });
    }
    for (k, &i) in spec.keyframes.iter().zip(&idx) {
        knots.push(Knot {
            f: i as f64,
            p: k.translation,
            q: k.rotation,
        });
    }
    if spec.looped {
        for j in 0..2.min(n) {
            let k = &spec.keyframes[j];
            knots.push(Knot {
                f: idx[j] as f64 + period,
                p: k.translation,
                q: k.rotation,
            });
        }
    }
    let m = knots.len();
    let tangent = |j: usize| -> Vec3 {
        let (a, b) = (j.saturating_sub(1), (j + 1).min(m - 1));
        (knots[b].p - knots[a].p).scale(1.0 / (knots[b].f - knots[a].f))
    };

    let mut out = Vec::with_capacity(spec.total_frames as usize);
    let mut seg = 0usize;
    for frame in 0..spec.total_frames {
        let f = frame as f64;
        let t = spec.start_time + f / spec.fps;
        while seg + 1 < m && knots[seg + 1].f <= f {
            seg += 1;
        }
        let k = &knots[seg];
        let pose = if k.f == f {
            Pose::new(k.p, k.q, t)
        } else if f < k.f || seg + 1 == m {
            // Before the first or after the last knot.
            Pose::new(k.p, k.q, t)
        } else {
            let k1 = &knots[seg + 1];
            let span = k1.f - k.f;
            let s = (f - k.f) / span;
            let p = hermite(k.p, tangent(seg), k1.p, tangent(seg + 1), span, s);
            Pose::new(p, k.q.slerp(&k1.q, s), t)
        };
        out.push(pose);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLimits {
    pub max_speed: f64,
    pub max_yaw_rate: f64,
}

impl Default for TrajectoryLimits {
    fn default() -> Self {
        Self {
            max_speed: 40.0,
            max_yaw_rate: PI / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Speed,
    YawRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Index of the first pose of the offending step.
    pub frame: usize,
    pub kind: ViolationKind,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryReport {
    /// Speed over step `i -> i + 1`, m/s.
    pub speeds: Vec<f64>,
    /// Absolute yaw rate over step `i -> i + 1`, rad/s.
    pub yaw_rates: Vec<f64>,
    pub violations: Vec<Violation>,
}

impl TrajectoryReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Finite-difference speed and yaw rate at `fps`; values strictly above a
/// limit are reported.
pub fn validate_trajectory(traj: &[Pose], fps: f64, limits: &TrajectoryLimits) -> TrajectoryReport {
    let mut report = TrajectoryReport::default();
    for (i, w) in traj.windows(2).enumerate() {
        let speed = (w[1].translation - w[0].translation).norm() * fps;
        let mut dyaw = w[1].rotation.yaw() - w[0].rotation.yaw();
        dyaw = (dyaw + PI).rem_euclid(2.0 * PI) - PI;
        let yaw_rate = dyaw.abs() * fps;
        report.speeds.push(speed);
        report.yaw_rates.push(yaw_rate);
        if speed > limits.max_speed {
            report.violations.push(Violation {
                frame: i,
                kind: ViolationKind::Speed,
                value: speed,
                limit: limits.max_speed,
            });
        }
        if yaw_rate > limits.max_yaw_rate {
            report.violations.push(Violation {
                frame: i,
                kind: ViolationKind::YawRate,
                value: yaw_rate,
                limit: limits.max_yaw_rate,
            });
        }
    }
    report
}

/// Export records: `{frame_index, translation, quaternion, timestamp}`.
pub fn to_pose_records(traj: &[Pose]) -> Vec<PoseRecord> {
    traj.iter()
        .enumerate()
        .map(|(i, p)| PoseRecord {
            frame_index: Some(i as u32),
            ..PoseRecord::from(p)
        })
        .collect()
}

pub fn export_trajectory(path: &Path, traj: &[Pose]) -> Result<()> {
    let json = serde_json::to_vec_pretty(&to_pose_records(traj))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn import_trajectory(path: &Path) -> Result<Vec<Pose>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<PoseRecord> =
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
    let poses: Vec<Pose> = records
        .iter()
        .map(Pose::from)
        .collect();
    crate::scene::validate_track(&poses, 2)?;
    Ok(poses)
}
