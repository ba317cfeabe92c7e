//! Conversion of third-party clip exports into the archive layout.
//!
//! A [`SourceDescriptor`] declares the source's axis convention, units,
//! quaternion order, box extent convention and category tables. Sources are
//! directories of per-clip JSON files ([`SourceClip`]); readers for
//! proprietary formats produce that shape upstream.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layout::{save_clips, RdsHqLayout};
use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::scene::{
    ClipAttributes, Cuboid, CuboidState, Geometry, GeometryKind, MapClass, MapEntity, ObjectCategory, ObjectTrack,
    Pose, Quaternion, RigidTransform, SceneClip, SceneClipParts, Vec3,
};

type Mat3 = [[f64; 3]; 3];

const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuaternionOrder {
    #[default]
    Wxyz,
    Xyzw,
}

fn default_axes() -> Mat3 {
    IDENTITY3
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDescriptor {
    pub name: String,
    /// Signed permutation taking source axes to world (x forward, y left,
    /// z up): `p_world = unit_scale * axes * p_src`.
    #[serde(default = "default_axes")]
    pub axes: Mat3,
    /// Meters per source length unit.
    #[serde(default = "default_scale")]
    pub unit_scale: f64,
    #[serde(default)]
    pub quaternion_order: QuaternionOrder,
    /// Box sizes in the source are half extents.
    #[serde(default)]
    pub half_extents: bool,
    pub categories: BTreeMap<String, ObjectCategory>,
    #[serde(default)]
    pub map_classes: BTreeMap<String, MapClass>,
    /// Fail instead of dropping unmapped categories and invalid records.
    #[serde(default)]
    pub strict: bool,
}

impl SourceDescriptor {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let d: SourceDescriptor =
            serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.unit_scale.is_finite() && self.unit_scale > 0.0) {
            return Err(Error::Config(format!("unit_scale must be positive, got {}", self.unit_scale)));
        }
        for row in &self.axes {
            let nonzero: Vec<f64> = row.iter().copied().filter(|v| *v != 0.0).collect();
            if nonzero.len() != 1 || nonzero[0].abs() != 1.0 {
                return Err(Error::Config("axes must be a signed permutation matrix".into()));
            }
        }
        for j in 0..3 {
            if (0..3).filter(|&i| self.axes[i][j] != 0.0).count() != 1 {
                return Err(Error::Config("axes must be a signed permutation matrix".into()));
            }
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.axes == IDENTITY3 && self.unit_scale == 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourcePose {
    pub timestamp: f64,
    pub translation: [f64; 3],
    pub quaternion: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceBox {
    pub timestamp: f64,
    pub center: [f64; 3],
    pub quaternion: [f64; 4],
    pub size: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceObject {
    pub id: String,
    pub category: String,
    pub states: Vec<SourceBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMapFeature {
    pub id: String,
    pub class: String,
    #[serde(default)]
    pub vertices: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cuboid: Option<SourceBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceClip {
    pub clip_id: String,
    #[serde(default)]
    pub caption: String,
    #[serde(default)]
    pub attributes: ClipAttributes,
    pub poses: Vec<SourcePose>,
    #[serde(default)]
    pub objects: Vec<SourceObject>,
    #[serde(default)]
    pub map: Vec<SourceMapFeature>,
    /// Cameras with extrinsics relative to the source ego frame, translation
    /// in source units.
    #[serde(default)]
    pub cameras: Vec<CameraModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    UnmappedCategory,
    UnmappedMapClass,
    InvalidEntity,
    InvalidTrack,
    InvalidClip,
    UnreadableRecord,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConversionReport {
    pub source: String,
    pub clips: Vec<String>,
    pub map_entities: usize,
    pub object_tracks: usize,
    pub poses: usize,
    pub dropped: BTreeMap<DropReason, usize>,
}

impl ConversionReport {
    pub fn dropped_total(&self) -> usize {
        self.dropped.values().sum()
    }

    fn drop(&mut self, reason: DropReason, what: &str) {
        log::warn!("dropping {what}: {reason:?}");
        *self.dropped.entry(reason).or_default() += 1;
    }
}

struct Frame<'a> {
    d: &'a SourceDescriptor,
}

impl Frame<'_> {
    fn point(&self, p: [f64; 3]) -> Vec3 {
        if self.d.is_identity() {
            return Vec3::new(p[0], p[1], p[2]);
        }
        let a = &self.d.axes;
        let s = self.d.unit_scale;
        Vec3::new(
            s * (a[0][0] * p[0] + a[0][1] * p[1] + a[0][2] * p[2]),
            s * (a[1][0] * p[0] + a[1][1] * p[1] + a[1][2] * p[2]),
            s * (a[2][0] * p[0] + a[2][1] * p[1] + a[2][2] * p[2]),
        )
    }

    fn quaternion(&self, q: [f64; 4]) -> Result<Quaternion> {
        let (w, x, y, z) = match self.d.quaternion_order {
            QuaternionOrder::Wxyz => (q[0], q[1], q[2], q[3]),
            QuaternionOrder::Xyzw => (q[3], q[0], q[1], q[2]),
        };
        let q = Quaternion::new_unit(w, x, y, z)?;
        if self.d.axes == IDENTITY3 {
            return Ok(q);
        }
        // Change of basis: C R C^T.
        let r = q.to_matrix();
        let c = &self.d.axes;
        let m = mul(&mul(c, &r), &transpose(c));
        Ok(Quaternion::from_matrix(&m))
    }

    /// Box size re-expressed along the converted body axes.
    fn size(&self, s: [f64; 3]) -> Vec3 {
        let k = if self.d.half_extents { 2.0 } else { 1.0 };
        if self.d.axes == IDENTITY3 && self.d.unit_scale == 1.0 {
            return Vec3::new(k * s[0], k * s[1], k * s[2]);
        }
        let a = &self.d.axes;
        let f = k * self.d.unit_scale;
        let pick = |i: usize| (0..3).map(|j| a[i][j].abs() * s[j]).sum::<f64>() * f;
        Vec3::new(pick(0), pick(1), pick(2))
    }

    fn cuboid(&self, b: &SourceBox) -> Result<Cuboid> {
        Cuboid::new(
            RigidTransform::new(self.point(b.center), self.quaternion(b.quaternion)?),
            self.size(b.size),
        )
    }

    fn camera(&self, cam: &CameraModel) -> Result<CameraModel> {
        if self.d.is_identity() {
            return Ok(cam.clone());
        }
        // p_cam = R * p_src_ego + t, with p_src_ego = C^T p_world_ego / s.
        let r = cam.camera_from_ego.rotation.to_matrix();
        let m = mul(&r, &transpose(&self.d.axes));
        let t = cam.camera_from_ego.translation.scale(self.d.unit_scale);
        CameraModel::new(
            cam.name.clone(),
            cam.intrinsics.clone(),
            RigidTransform::new(t, Quaternion::from_matrix(&m)),
        )
    }
}

fn mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

/// Converts one source clip. Unmapped categories and invalid records are
/// dropped and counted unless the descriptor is strict.
pub fn convert_clip(d: &SourceDescriptor, src: &SourceClip, report: &mut ConversionReport) -> Result<SceneClip> {
    let frame = Frame { d };
    let strict_err = |what: String| Error::Config(format!("{}: {what}", src.clip_id));

    let mut map_entities = Vec::new();
    for f in &src.map {
        let Some(&class) = d.map_classes.get(&f.class) else {
            if d.strict {
                return Err(strict_err(format!("map class {:?} not in descriptor", f.class)));
            }
            report.drop(DropReason::UnmappedMapClass, &f.id);
            continue;
        };
        let geometry = match class.geometry_kind() {
            GeometryKind::Polyline => Ok(Geometry::Polyline {
                vertices: f.vertices.iter().map(|p| frame.point(*p)).collect(),
            }),
            GeometryKind::Polygon => Ok(Geometry::Polygon {
                vertices: f.vertices.iter().map(|p| frame.point(*p)).collect(),
            }),
            GeometryKind::Cuboid => match &f.cuboid {
                Some(b) => frame.cuboid(b).map(Geometry::Cuboid),
                None => Err(Error::Invariant(format!("{}: cuboid class without box", f.id))),
            },
        };
        match geometry.and_then(|g| MapEntity::new(f.id.clone(), class, g)) {
            Ok(e) => map_entities.push(e),
            Err(e) if d.strict => return Err(strict_err(e.to_string())),
            Err(_) => report.drop(DropReason::InvalidEntity, &f.id),
        }
    }

    let mut object_tracks = Vec::new();
    for o in &src.objects {
        let Some(&category) = d.categories.get(&o.category) else {
            if d.strict {
                return Err(strict_err(format!("category {:?} not in descriptor", o.category)));
            }
            report.drop(DropReason::UnmappedCategory, &o.id);
            continue;
        };
        let track = o
            .states
            .iter()
            .map(|b| {
                Ok(CuboidState {
                    timestamp: b.timestamp,
                    cuboid: frame.cuboid(b)?,
                })
            })
            .collect::<Result<Vec<_>>>()
            .and_then(|states| ObjectTrack::new(o.id.clone(), category, states));
        match track {
            Ok(t) => object_tracks.push(t),
            Err(e) if d.strict => return Err(strict_err(e.to_string())),
            Err(_) => report.drop(DropReason::InvalidTrack, &o.id),
        }
    }

    let ego_pose_track = src
        .poses
        .iter()
        .map(|p| Ok(Pose::new(frame.point(p.translation), frame.quaternion(p.quaternion)?, p.timestamp)))
        .collect::<Result<Vec<_>>>()?;
    let camera_rig = src.cameras.iter().map(|c| frame.camera(c)).collect::<Result<Vec<_>>>()?;

    SceneClip::new(SceneClipParts {
        clip_id: src.clip_id.clone(),
        map_entities,
        object_tracks,
        ego_pose_track,
        camera_rig,
        lidar_sweeps: None,
        caption: src.caption.clone(),
        attributes: src.attributes.clone(),
    })
}

/// Converts every `*.json` clip file in `src_dir` (sorted by name) and
/// writes the valid clips to `layout`.
pub fn convert_third_party(d: &SourceDescriptor, src_dir: &Path, layout: &RdsHqLayout) -> Result<ConversionReport> {
    d.validate()?;
    let mut files: Vec<_> = std::fs::read_dir(src_dir)
        .map_err(|e| Error::io(src_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut report = ConversionReport {
        source: d.name.clone(),
        ..Default::default()
    };
    let mut clips = Vec::new();
    for path in files {
        let parsed: Result<SourceClip> = std::fs::read(&path)
            .map_err(|e| Error::io(&path, e))
            .and_then(|b| serde_json::from_slice(&b).map_err(|e| Error::parse(path.display().to_string(), e)));
        let src = match parsed {
            Ok(s) => s,
            Err(e) if d.strict => return Err(e),
            Err(_) => {
                report.drop(DropReason::UnreadableRecord, &path.display().to_string());
                continue;
            }
        };
        let before = report.clone();
        match convert_clip(d, &src, &mut report) {
            Ok(clip) => {
                report.map_entities += clip.map_entities().len();
                report.object_tracks += clip.object_tracks().len();
                report.poses += clip.ego_pose_track().len();
                report.clips.push(clip.clip_id().to_string());
                clips.push(clip);
            }
            Err(e) if d.strict => return Err(e),
            Err(_) => {
                // Record-level drops inside a rejected clip are not counted.
                report = before;
                report.drop(DropReason::InvalidClip, &src.clip_id);
            }
        }
    }
    save_clips(layout, &clips)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn descriptor() -> SourceDescriptor {
        SourceDescriptor {
            name: "t".into(),
            axes: IDENTITY3,
            unit_scale: 1.0,
            quaternion_order: QuaternionOrder::Wxyz,
            half_extents: false,
            categories: BTreeMap::from([("VEHICLE".into(), ObjectCategory::Automobile)]),
            map_classes: BTreeMap::from([("LANE".into(), MapClass::LaneLine)]),
            strict: false,
        }
    }

    fn clip() -> SourceClip {
        SourceClip {
            clip_id: "c1".into(),
            caption: "x".into(),
            attributes: Default::default(),
            poses: vec![
                SourcePose {
                    timestamp: 0.0,
                    translation: [0.0; 3],
                    quaternion: [1.0, 0.0, 0.0, 0.0],
                },
                SourcePose {
                    timestamp: 1.0,
                    translation: [1.0, 2.0, 3.0],
                    quaternion: [1.0, 0.0, 0.0, 0.0],
                },
            ],
            objects: vec![SourceObject {
                id: "o".into(),
                category: "CYCLIST".into(),
                states: vec![SourceBox {
                    timestamp: 0.0,
                    center: [1.0, 0.0, 0.0],
                    quaternion: [1.0, 0.0, 0.0, 0.0],
                    size: [1.0, 1.0, 1.0],
                }],
            }],
            map: vec![SourceMapFeature {
                id: "l".into(),
                class: "LANE".into(),
                vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
                cuboid: None,
            }],
            cameras: vec![],
        }
    }

    #[test]
    fn unmapped_dropped_or_fatal() {
        let mut r = ConversionReport::default();
        let c = convert_clip(&descriptor(), &clip(), &mut r).unwrap();
        assert_eq!(c.object_tracks().len(), 0);
        assert_eq!(r.dropped[&DropReason::UnmappedCategory], 1);
        let mut strict = descriptor();
        strict.strict = true;
        assert!(convert_clip(&strict, &clip(), &mut ConversionReport::default()).is_err());
    }

    #[test]
    fn axis_and_unit_conversion() {
        // Source: x right, y forward, z up, centimeters.
        let mut d = descriptor();
        d.axes = [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        d.unit_scale = 0.01;
        d.half_extents = true;
        let f = Frame { d: &d };
        let p = f.point([100.0, 200.0, 50.0]);
        assert_eq!(p, Vec3::new(2.0, -1.0, 0.5));
        let s = f.size([200.0, 100.0, 50.0]);
        assert_eq!(s, Vec3::new(2.0, 4.0, 1.0));
        d.axes = [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        d.validate().unwrap();
        d.axes = [[0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(d.validate().is_err());
    }

    #[test]
    fn xyzw_order() {
        let mut d = descriptor();
        d.quaternion_order = QuaternionOrder::Xyzw;
        let f = Frame { d: &d };
        let q = f.quaternion([0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(q, Quaternion::IDENTITY);
    }
}
