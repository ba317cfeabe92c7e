use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::lidar::io::{decode_sweeps, encode_sweeps};
use crate::scene::{
    validate_clip_id, ClipAttributes, MapEntity, ObjectTrack, Pose, PoseRecord, SceneClip, SceneClipParts,
};

/// One tar archive per attribute under the layout root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Hdmap,
    Objects,
    Poses,
    Calibration,
    Captions,
    Lidar,
}

impl Attribute {
    pub const ALL: [Attribute; 6] = [
        Attribute::Hdmap,
        Attribute::Objects,
        Attribute::Poses,
        Attribute::Calibration,
        Attribute::Captions,
        Attribute::Lidar,
    ];

    pub const MANDATORY: [Attribute; 5] = [
        Attribute::Hdmap,
        Attribute::Objects,
        Attribute::Poses,
        Attribute::Calibration,
        Attribute::Captions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Hdmap => "hdmap",
            Attribute::Objects => "objects",
            Attribute::Poses => "poses",
            Attribute::Calibration => "calibration",
            Attribute::Captions => "captions",
            Attribute::Lidar => "lidar",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Attribute::Lidar => "bin",
            _ => "json",
        }
    }

    pub fn member(self, clip_id: &str) -> String {
        format!("{clip_id}.{}", self.extension())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub cameras: Vec<CameraModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub caption: String,
    #[serde(default)]
    pub attributes: ClipAttributes,
}

/// `<root>/<attribute>.tar`, each holding `<clip_id>.json` (or `.bin` for
/// LiDAR) records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RdsHqLayout {
    root: PathBuf,
}

impl RdsHqLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn archive_path(&self, attr: Attribute) -> PathBuf {
        self.root.join(format!("{}.tar", attr.as_str()))
    }

    fn lock_path(&self, attr: Attribute) -> PathBuf {
        self.root.join(format!("{}.tar.lock", attr.as_str()))
    }

    /// Clip ids present in the poses archive, sorted.
    pub fn list_clips(&self) -> Result<Vec<String>> {
        let path = self.archive_path(Attribute::Poses);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut ids: Vec<String> = read_archive(&path)?
            .into_keys()
            .filter_map(|name| name.strip_suffix(".json").map(str::to_string))
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Raw bytes of one record, or `None` when the archive or member is
    /// absent.
    pub fn read_record(&self, attr: Attribute, clip_id: &str) -> Result<Option<Vec<u8>>> {
        let path = self.archive_path(attr);
        if !path.exists() {
            return Ok(None);
        }
        let _guard = lock(&self.lock_path(attr), false)?;
        read_member(&path, &attr.member(clip_id))
    }

    /// Replaces or inserts records in one attribute archive. The archive is
    /// rewritten to a temporary file and renamed into place under an
    /// exclusive advisory lock.
    pub fn write_records(&self, attr: Attribute, records: &[(String, Vec<u8>)]) -> Result<()> {
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let _guard = lock(&self.lock_path(attr), true)?;
        let path = self.archive_path(attr);
        let mut members = if path.exists() {
            read_archive(&path)?
        } else {
            BTreeMap::new()
        };
        for (clip_id, bytes) in records {
            members.insert(attr.member(clip_id), bytes.clone());
        }
        let tmp = tempfile::NamedTempFile::new_in(&self.root).map_err(|e| Error::io(&self.root, e))?;
        {
            let mut builder = tar::Builder::new(tmp.as_file());
            for (name, bytes) in &members {
                let mut header = tar::Header::new_gnu();
                header.set_size(bytes.len() as u64);
                header.set_mode(0o644);
                header.set_mtime(0);
                header.set_entry_type(tar::EntryType::Regular);
                builder
                    .append_data(&mut header, name, bytes.as_slice())
                    .map_err(|e| Error::io(&path, e))?;
            }
            builder.finish().map_err(|e| Error::io(&path, e))?;
        }
        tmp.as_file().sync_all().map_err(|e| Error::io(&path, e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }
}

struct LockGuard(File);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = self.0.unlock();
    }
}

fn lock(path: &Path, exclusive: bool) -> Result<LockGuard> {
    let f = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .read(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    if exclusive {
        f.lock().map_err(|e| Error::io(path, e))?;
    } else {
        f.lock_shared().map_err(|e| Error::io(path, e))?;
    }
    Ok(LockGuard(f))
}

fn read_archive(path: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut archive = tar::Archive::new(file);
    let mut out = BTreeMap::new();
    for entry in archive.entries().map_err(|e| Error::io(path, e))? {
        let mut entry = entry.map_err(|e| Error::io(path, e))?;
        let name = entry
            .path()
            .map_err(|e| Error::io(path, e))?
            .to_string_lossy()
            .into_owned();
        let mut bytes = Vec::new();
        entry.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        out.insert(name, bytes);
    }
    Ok(out)
}

fn read_member(path: &Path, member: &str) -> Result<Option<Vec<u8>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut archive = tar::Archive::new(file);
    for entry in archive.entries().map_err(|e| Error::io(path, e))? {
        let mut entry = entry.map_err(|e| Error::io(path, e))?;
        let is_match = entry.path().map_err(|e| Error::io(path, e))?.to_str() == Some(member);
        if is_match {
            let mut bytes = Vec::new();
            entry.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
            return Ok(Some(bytes));
        }
    }
    Ok(None)
}

fn record_path(layout: &RdsHqLayout, attr: Attribute, clip_id: &str) -> String {
    format!("{}:{}", layout.archive_path(attr).display(), attr.member(clip_id))
}

fn parse_json<T: serde::de::DeserializeOwned>(
    layout: &RdsHqLayout,
    attr: Attribute,
    clip_id: &str,
    bytes: &[u8],
) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::parse(record_path(layout, attr, clip_id), e))
}

fn required(layout: &RdsHqLayout, attr: Attribute, clip_id: &str) -> Result<Vec<u8>> {
    layout
        .read_record(attr, clip_id)?
        .ok_or_else(|| Error::MissingAttribute {
            clip_id: clip_id.to_string(),
            attribute: attr.as_str().to_string(),
        })
}

/// Reads and validates one clip. Every scene invariant is checked before a
/// clip is returned.
pub fn load_clip(layout: &RdsHqLayout, clip_id: &str) -> Result<SceneClip> {
    validate_clip_id(clip_id)?;
    let mut raw = BTreeMap::new();
    for attr in Attribute::MANDATORY {
        raw.insert(attr, required(layout, attr, clip_id)?);
    }
    let map_entities: Vec<MapEntity> = parse_json(layout, Attribute::Hdmap, clip_id, &raw[&Attribute::Hdmap])?;
    let object_tracks: Vec<ObjectTrack> =
        parse_json(layout, Attribute::Objects, clip_id, &raw[&Attribute::Objects])?;
    let poses: Vec<PoseRecord> = parse_json(layout, Attribute::Poses, clip_id, &raw[&Attribute::Poses])?;
    let calib: CalibrationRecord =
        parse_json(layout, Attribute::Calibration, clip_id, &raw[&Attribute::Calibration])?;
    let captions: CaptionRecord = parse_json(layout, Attribute::Captions, clip_id, &raw[&Attribute::Captions])?;
    let lidar_sweeps = match layout.read_record(Attribute::Lidar, clip_id)? {
        Some(bytes) => Some(decode_sweeps(&bytes, &record_path(layout, Attribute::Lidar, clip_id))?),
        None => None,
    };
    let ego_pose_track: Vec<Pose> = poses.iter().map(Pose::from).collect();
    SceneClip::new(SceneClipParts {
        clip_id: clip_id.to_string(),
        map_entities,
        object_tracks,
        ego_pose_track,
        camera_rig: calib.cameras,
        lidar_sweeps,
        caption: captions.caption,
        attributes: captions.attributes,
    })
    .map_err(|e| Error::parse(format!("{}:{clip_id}", layout.root().display()), e))
}

/// Serialized records of a clip, keyed by attribute.
pub fn clip_records(clip: &SceneClip) -> Result<Vec<(Attribute, Vec<u8>)>> {
    let p = clip.parts();
    let poses: Vec<PoseRecord> = p
        .ego_pose_track
        .iter()
        .enumerate()
        .map(|(i, pose)| PoseRecord {
            frame_index: Some(i as u32),
            ..PoseRecord::from(pose)
        })
        .collect();
    let mut out = vec![
        (Attribute::Hdmap, serde_json::to_vec_pretty(&p.map_entities)?),
        (Attribute::Objects, serde_json::to_vec_pretty(&p.object_tracks)?),
        (Attribute::Poses, serde_json::to_vec_pretty(&poses)?),
        (
            Attribute::Calibration,
            serde_json::to_vec_pretty(&CalibrationRecord {
                cameras: p.camera_rig.clone(),
            })?,
        ),
        (
            Attribute::Captions,
            serde_json::to_vec_pretty(&CaptionRecord {
                caption: p.caption.clone(),
                attributes: p.attributes.clone(),
            })?,
        ),
    ];
    if let Some(sweeps) = &p.lidar_sweeps {
        out.push((Attribute::Lidar, encode_sweeps(sweeps)));
    }
    Ok(out)
}

/// Writes every attribute record of a clip.
pub fn save_clip(layout: &RdsHqLayout, clip: &SceneClip) -> Result<()> {
    save_clips(layout, std::slice::from_ref(clip))
}

/// Writes many clips with one archive rewrite per attribute.
pub fn save_clips(layout: &RdsHqLayout, clips: &[SceneClip]) -> Result<()> {
    let mut by_attr: BTreeMap<Attribute, Vec<(String, Vec<u8>)>> = BTreeMap::new();
    for clip in clips {
        for (attr, bytes) in clip_records(clip)? {
            by_attr.entry(attr).or_default().push((clip.clip_id().to_string(), bytes));
        }
    }
    for (attr, records) in by_attr {
        layout.write_records(attr, &records)?;
    }
    Ok(())
}

/// Writes a record verbatim; for fixtures and tooling that need malformed
/// or partial clips.
pub fn write_raw_record(layout: &RdsHqLayout, attr: Attribute, clip_id: &str, bytes: &[u8]) -> Result<()> {
    layout.write_records(attr, &[(clip_id.to_string(), bytes.to_vec())])
}

/// Replaces a file through a temporary sibling and a rename.
pub(crate) fn write_file_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
