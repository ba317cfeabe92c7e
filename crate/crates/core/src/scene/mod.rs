//! In-memory model of a labeled driving clip.

mod entities;
mod geometry;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

pub use entities::{
    cuboid_corners, polygon_self_intersects, Cuboid, CuboidState, Geometry, GeometryKind,
    MapClass, MapEntity, ObjectCategory, ObjectTrack, CUBOID_EDGES, CUBOID_FACES,
};
pub use geometry::{Pose, Quaternion, RigidTransform, Vec3, UNIT_NORM_TOLERANCE};

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::lidar::Sweep;

/// Pose on a timestamped track at time `t`.
///
/// Translation is interpolated linearly and rotation by shortest-arc slerp
/// between the bracketing poses. Knot timestamps return the stored pose
/// unchanged.
pub fn interpolate_pose(track: &[Pose], t: f64) -> Result<Pose> {
    if track.len() < 2 {
        return Err(Error::Precondition(format!(
            "pose track needs at least 2 poses, got {}",
            track.len()
        )));
    }
    let (start, end) = (track[0].timestamp, track[track.len() - 1].timestamp);
    if !t.is_finite() || t < start || t > end {
        return Err(Error::OutOfRange { t, start, end });
    }
    let i = match track.binary_search_by(|p| p.timestamp.total_cmp(&t)) {
        Ok(k) => return Ok(track[k]),
        Err(i) => i - 1,
    };
    let (a, b) = (&track[i], &track[i + 1]);
    let s = (t - a.timestamp) / (b.timestamp - a.timestamp);
    Ok(Pose::new(
        a.translation.lerp(b.translation, s),
        a.rotation.slerp(&b.rotation, s),
        t,
    ))
}

/// Checks the invariants of a pose track: unit rotations and strictly
/// increasing timestamps.
pub fn validate_track(track: &[Pose], min_len: usize) -> Result<()> {
    if track.len() < min_len {
        return Err(Error::Invariant(format!(
            "pose track needs at least {min_len} poses, got {}",
            track.len()
        )));
    }
    for p in track {
        p.validate()?;
    }
    if track.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
        return Err(Error::Invariant(
            "pose timestamps not strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Clip ids are embedded in underscore-delimited chunk names and used as
/// archive member names.
pub fn validate_clip_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '.');
    if ok {
        Ok(())
    } else {
        Err(Error::Invariant(format!(
            "clip id {id:?} must be non-empty and use only [A-Za-z0-9.-]"
        )))
    }
}

/// Free-form clip tags such as `weather` and `time_of_day`.
pub type ClipAttributes = BTreeMap<String, String>;

/// The raw parts of a clip, validated by [`SceneClip::new`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneClipParts {
    pub clip_id: String,
    pub map_entities: Vec<MapEntity>,
    pub object_tracks: Vec<ObjectTrack>,
    pub ego_pose_track: Vec<Pose>,
    pub camera_rig: Vec<CameraModel>,
    pub lidar_sweeps: Option<Vec<Sweep>>,
    pub caption: String,
    pub attributes: ClipAttributes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneClip {
    parts: SceneClipParts,
}

impl SceneClip {
    pub fn new(parts: SceneClipParts) -> Result<Self> {
        validate_clip_id(&parts.clip_id)?;
        validate_track(&parts.ego_pose_track, 2)?;
        let (start, end) = (
            parts.ego_pose_track[0].timestamp,
            parts.ego_pose_track[parts.ego_pose_track.len() - 1].timestamp,
        );
        let in_span = |t: f64| t >= start && t <= end;

        let mut names = HashSet::new();
        for cam in &parts.camera_rig {
            cam.validate()?;
            if !names.insert(cam.name.as_str()) {
                return Err(Error::Invariant(format!(
                    "duplicate camera name {:?} in rig",
                    cam.name
                )));
            }
        }
        let mut ids = HashSet::new();
        for e in &parts.map_entities {
            if !ids.insert(e.id()) {
                return Err(Error::Invariant(format!("duplicate map entity id {:?}", e.id())));
            }
        }
        let mut ids = HashSet::new();
        for track in &parts.object_tracks {
            if !ids.insert(track.id()) {
                return Err(Error::Invariant(format!("duplicate track id {:?}", track.id())));
            }
            let (a, b) = track.span();
            if !in_span(a) || !in_span(b) {
                return Err(Error::Invariant(format!(
                    "track {} spans [{a}, {b}], outside ego track [{start}, {end}]",
                    track.id()
                )));
            }
        }
        if let Some(sweeps) = &parts.lidar_sweeps {
            for (i, s) in sweeps.iter().enumerate() {
                s.validate()?;
                if !in_span(s.sweep_start_time) {
                    return Err(Error::Invariant(format!(
                        "sweep {i} starts at {}, outside ego track [{start}, {end}]",
                        s.sweep_start_time
                    )));
                }
            }
        }
        Ok(Self { parts })
    }

    pub fn clip_id(&self) -> &str {
        &self.parts.clip_id
    }

    pub fn map_entities(&self) -> &[MapEntity] {
        &self.parts.map_entities
    }

    pub fn object_tracks(&self) -> &[ObjectTrack] {
        &self.parts.object_tracks
    }

    pub fn ego_pose_track(&self) -> &[Pose] {
        &self.parts.ego_pose_track
    }

    pub fn camera_rig(&self) -> &[CameraModel] {
        &self.parts.camera_rig
    }

    pub fn camera(&self, name: &str) -> Option<&CameraModel> {
        self.parts.camera_rig.iter().find(|c| c.name == name)
    }

    pub fn lidar_sweeps(&self) -> Option<&[Sweep]> {
        self.parts.lidar_sweeps.as_deref()
    }

    pub fn caption(&self) -> &str {
        &self.parts.caption
    }

    pub fn attributes(&self) -> &ClipAttributes {
        &self.parts.attributes
    }

    /// First and last ego timestamps.
    pub fn time_span(&self) -> (f64, f64) {
        let t = &self.parts.ego_pose_track;
        (t[0].timestamp, t[t.len() - 1].timestamp)
    }

    pub fn ego_pose_at(&self, t: f64) -> Result<Pose> {
        interpolate_pose(&self.parts.ego_pose_track, t)
    }

    pub fn parts(&self) -> &SceneClipParts {
        &self.parts
    }

    pub fn into_parts(self) -> SceneClipParts {
        self.parts
    }

    /// Same scene driven along a different ego track. Object tracks and
    /// sweeps outside the new span are kept only if still valid.
    pub fn with_ego_track(&self, track: Vec<Pose>) -> Result<SceneClip> {
        let mut parts = self.parts.clone();
        parts.ego_pose_track = track;
        let (start, end) = (
            parts.ego_pose_track.first().map_or(0.0, |p| p.timestamp),
            parts.ego_pose_track.last().map_or(0.0, |p| p.timestamp),
        );
        parts.object_tracks.retain(|t| {
            let (a, b) = t.span();
            a >= start && b <= end
        });
        if let Some(sweeps) = &mut parts.lidar_sweeps {
            sweeps.retain(|s| s.sweep_start_time >= start && s.sweep_start_time <= end);
        }
        SceneClip::new(parts)
    }
}

/// Serialized pose record shared by ego tracks and exported trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_index: Option<u32>,
    pub translation: Vec3,
    pub quaternion: Quaternion,
    pub timestamp: f64,
}

impl From<&Pose> for PoseRecord {
    fn from(p: &Pose) -> Self {
        PoseRecord {
            frame_index: None,
            translation: p.translation,
            quaternion: p.rotation,
            timestamp: p.timestamp,
        }
    }
}

impl From<&PoseRecord> for Pose {
    fn from(r: &PoseRecord) -> Self {
        Pose::new(r.translation, r.quaternion, r.timestamp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn two_pose_track(a: Pose, b: Pose) -> Vec<Pose> {
        vec![a, b]
    }

    #[test]
    fn knot_is_exact() {
        let track = vec![
            Pose::new(Vec3::new(0.1, 0.2, 0.3), Quaternion::from_yaw(0.3), 0.0),
            Pose::new(Vec3::new(1.7, -0.2, 0.3), Quaternion::from_yaw(1.1), 0.4),
            Pose::new(Vec3::new(2.9, 0.5, 0.1), Quaternion::from_yaw(-0.2), 1.0),
        ];
        for p in &track {
            assert_eq!(interpolate_pose(&track, p.timestamp).unwrap(), *p);
        }
    }

    #[test]
    fn linear_midpoint() {
        let track = two_pose_track(
            Pose::new(Vec3::ZERO, Quaternion::IDENTITY, 0.0),
            Pose::new(Vec3::new(2.0, 0.0, 0.0), Quaternion::IDENTITY, 1.0),
        );
        let p = interpolate_pose(&track, 0.5).unwrap();
        assert_eq!(p.translation, Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn yaw_midpoint_matches_axis_angle_halving() {
        let track = two_pose_track(
            Pose::new(Vec3::ZERO, Quaternion::IDENTITY, 0.0),
            Pose::new(Vec3::ZERO, Quaternion::from_yaw(FRAC_PI_2), 1.0),
        );
        let q = interpolate_pose(&track, 0.5).unwrap().rotation;
        // Axis-angle oracle: half of a 90° turn about +z is 45°, i.e.
        // (cos 22.5°, 0, 0, sin 22.5°).
        let half = std::f64::consts::FRAC_PI_8;
        assert!((q.w - half.cos()).abs() < 1e-12);
        assert!((q.z - half.sin()).abs() < 1e-12);
        assert!(q.x.abs() < 1e-15 && q.y.abs() < 1e-15);
    }

    #[test]
    fn out_of_range_names_span() {
        let track = two_pose_track(
            Pose::new(Vec3::ZERO, Quaternion::IDENTITY, 1.0),
            Pose::new(Vec3::ZERO, Quaternion::IDENTITY, 2.0),
        );
        let err = interpolate_pose(&track, 2.5).unwrap_err().to_string();
        assert!(err.contains("[1, 2]"), "{err}");
    }

    #[test]
    fn clip_id_charset() {
        assert!(validate_clip_id("abc-01.x").is_ok());
        assert!(validate_clip_id("a_b").is_err());
        assert!(validate_clip_id("").is_err());
        assert!(validate_clip_id("a/b").is_err());
    }
}
