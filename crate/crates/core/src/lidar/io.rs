//! On-disk formats for range maps and sweeps.
//!
//! A range map is stored as `<stem>.bin` (row-major little-endian `f32`)
//! next to a `<stem>.json` sidecar. Invalid cells of a raw range map hold
//! the sentinel `-1.0`; normalized maps carry an explicit `<stem>.mask`
//! file (one byte per source cell) because their fill value is a legal
//! normalized value.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::normalize::NormalizedRangeMap;
use super::range_map::{RangeMap, INVALID_RANGE};
use super::sensor::SensorModel;
use super::{FrameTag, Sweep};
use crate::error::{Error, Result};
use crate::scene::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Range,
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ValidityEncoding {
    Sentinel { value: f32 },
    MaskFile { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeMapSidecar {
    #[serde(rename = "H")]
    pub height: usize,
    #[serde(rename = "W")]
    pub width: usize,
    pub kind: GridKind,
    pub dtype: String,
    pub sensor_model: SensorModel,
    pub sweep_start_time: f64,
    #[serde(default)]
    pub clip_lo: Option<f64>,
    #[serde(default)]
    pub clip_hi: Option<f64>,
    #[serde(default)]
    pub fill_value: Option<f64>,
    pub validity: ValidityEncoding,
}

const DTYPE: &str = "float32_le";

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn f32_bytes(values: impl Iterator<Item = f32>) -> Vec<u8> {
    values.flat_map(|v| v.to_le_bytes()).collect()
}

fn read_f32s(path: &Path, expected: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected * 4 {
        return Err(Error::parse(
            path.display().to_string(),
            format!("expected {} bytes, found {}", expected * 4, bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_sidecar(stem: &Path) -> Result<RangeMapSidecar> {
    let p = with_ext(stem, "json");
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let sc: RangeMapSidecar =
        serde_json::from_str(&text).map_err(|e| Error::parse(p.display().to_string(), e))?;
    sc.sensor_model
        .validate()
        .map_err(|e| Error::parse(p.display().to_string(), e))?;
    if sc.dtype != DTYPE {
        return Err(Error::parse(p.display().to_string(), format!("unsupported dtype {}", sc.dtype)));
    }
    Ok(sc)
}

pub fn write_range_map(stem: &Path, map: &RangeMap) -> Result<()> {
    write(&with_ext(stem, "bin"), &f32_bytes(map.ranges().iter().copied()))?;
    let sidecar = RangeMapSidecar {
        height: map.height(),
        width: map.width(),
        kind: GridKind::Range,
        dtype: DTYPE.into(),
        sensor_model: map.sensor().as_ref().clone(),
        sweep_start_time: map.sweep_start_time(),
        clip_lo: None,
        clip_hi: None,
        fill_value: None,
        validity: ValidityEncoding::Sentinel { value: INVALID_RANGE },
    };
    write(&with_ext(stem, "json"), serde_json::to_string_pretty(&sidecar)?.as_bytes())
}

pub fn read_range_map(stem: &Path) -> Result<RangeMap> {
    let sc = read_sidecar(stem)?;
    if sc.kind != GridKind::Range {
        return Err(Error::parse(stem.display().to_string(), "not a raw range map"));
    }
    let sensor = Arc::new(sc.sensor_model);
    if sc.height != sensor.beam_count() || sc.width != sensor.width() {
        return Err(Error::parse(stem.display().to_string(), "grid shape disagrees with sensor model"));
    }
    let ranges = read_f32s(&with_ext(stem, "bin"), sc.height * sc.width)?;
    let ValidityEncoding::Sentinel { value } = sc.validity else {
        return Err(Error::parse(stem.display().to_string(), "raw maps use a sentinel"));
    };
    let valid = ranges.iter().map(|r| *r != value).collect();
    RangeMap::from_parts(sensor, sc.sweep_start_time, ranges, valid, None)
        .map_err(|e| Error::parse(stem.display().to_string(), e))
}

pub fn write_normalized(stem: &Path, map: &NormalizedRangeMap) -> Result<()> {
    write(&with_ext(stem, "bin"), &f32_bytes(map.values.iter().map(|v| *v as f32)))?;
    let mask_path = with_ext(stem, "mask");
    let mask: Vec<u8> = map.valid.iter().map(|v| *v as u8).collect();
    write(&mask_path, &mask)?;
    let sidecar = RangeMapSidecar {
        height: map.height,
        width: map.width,
        kind: GridKind::Normalized,
        dtype: DTYPE.into(),
        sensor_model: map.sensor().as_ref().clone(),
        sweep_start_time: map.sweep_start_time(),
        clip_lo: Some(map.clip_lo),
        clip_hi: Some(map.clip_hi),
        fill_value: Some(map.fill_value),
        validity: ValidityEncoding::MaskFile {
            path: mask_path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
        },
    };
    write(&with_ext(stem, "json"), serde_json::to_string_pretty(&sidecar)?.as_bytes())
}

pub fn read_normalized(stem: &Path) -> Result<NormalizedRangeMap> {
    let sc = read_sidecar(stem)?;
    let bad = |m: &str| Error::parse(stem.display().to_string(), m);
    if sc.kind != GridKind::Normalized {
        return Err(bad("not a normalized range map"));
    }
    let ValidityEncoding::MaskFile { path } = &sc.validity else {
        return Err(bad("normalized maps need a mask file"));
    };
    let mask_path = stem.parent().unwrap_or(Path::new(".")).join(path);
    let mask = fs::read(&mask_path).map_err(|e| Error::io(&mask_path, e))?;
    let values = read_f32s(&with_ext(stem, "bin"), sc.height * sc.width)?;
    let (lo, hi) = (sc.clip_lo.ok_or_else(|| bad("missing clip_lo"))?, sc.clip_hi.ok_or_else(|| bad("missing clip_hi"))?);
    NormalizedRangeMap::from_parts(
        Arc::new(sc.sensor_model),
        sc.sweep_start_time,
        values.into_iter().map(f64::from).collect(),
        mask.into_iter().map(|b| b != 0).collect(),
        lo,
        hi,
        sc.fill_value.unwrap_or(super::DEFAULT_FILL_VALUE),
    )
    .map_err(|e| Error::parse(stem.display().to_string(), e))
}

const SWEEP_MAGIC: &[u8; 8] = b"SDGSWP01";

/// Serializes sweeps as a little-endian blob: magic, sweep count, then per
/// sweep the start time, frame tag, intensity flag, point count, `f64`
/// coordinates and optional `f32` intensities.
pub fn encode_sweeps(sweeps: &[Sweep]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(SWEEP_MAGIC);
    out.extend_from_slice(&(sweeps.len() as u32).to_le_bytes());
    for s in sweeps {
        out.extend_from_slice(&s.sweep_start_time.to_le_bytes());
        out.push(match s.frame {
            FrameTag::World => 0,
            FrameTag::EgoAtStart => 1,
        });
        out.push(s.intensity.is_some() as u8);
        out.extend_from_slice(&(s.points.len() as u64).to_le_bytes());
        for p in &s.points {
            for c in [p.x, p.y, p.z] {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        if let Some(int) = &s.intensity {
            for v in int {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f32(&mut self) -> Option<f32> {
        self.take(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()))
    }
}

pub fn decode_sweeps(bytes: &[u8], path: &str) -> Result<Vec<Sweep>> {
    let err = |m: &str| Error::parse(path, m);
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8) != Some(&SWEEP_MAGIC[..]) {
        return Err(err("bad sweep blob magic"));
    }
    let count = r.u32().ok_or_else(|| err("truncated header"))?;
    let mut sweeps = Vec::new();
    for _ in 0..count {
        let start = r.f64().ok_or_else(|| err("truncated sweep"))?;
        let frame = match r.u8() {
            Some(0) => FrameTag::World,
            Some(1) => FrameTag::EgoAtStart,
            _ => return Err(err("bad frame tag")),
        };
        let has_int = match r.u8() {
            Some(0) => false,
            Some(1) => true,
            _ => return Err(err("bad intensity flag")),
        };
        let n = r.u64().ok_or_else(|| err("truncated sweep"))? as usize;
        // Cheap bound so corrupt counts cannot trigger huge allocations.
        if n.saturating_mul(24) > bytes.len() {
            return Err(err("point count exceeds blob size"));
        }
        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            let (x, y, z) = (r.f64(), r.f64(), r.f64());
            match (x, y, z) {
                (Some(x), Some(y), Some(z)) => points.push(Vec3::new(x, y, z)),
                _ => return Err(err("truncated points")),
            }
        }
        let intensity = if has_int {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                v.push(r.f32().ok_or_else(|| err("truncated intensity"))?);
            }
            Some(v)
        } else {
            None
        };
        let sweep = Sweep {
            points,
            frame,
            sweep_start_time: start,
            intensity,
        };
        sweep.validate().map_err(|e| Error::parse(path, e))?;
        sweeps.push(sweep);
    }
    if r.pos != bytes.len() {
        return Err(err("trailing bytes after sweeps"));
    }
    Ok(sweeps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lidar::normalize_for_diffusion;

    fn sample_map() -> RangeMap {
        let s = Arc::new(SensorModel::synthetic_zigzag(8, 32));
        let mut ranges = vec![INVALID_RANGE; 8 * 32];
        let mut valid = vec![false; 8 * 32];
        for i in (0..256).step_by(3) {
            ranges[i] = 1.0 + i as f32 * 0.25;
            valid[i] = true;
        }
        RangeMap::from_parts(s, 12.5, ranges, valid, None).unwrap()
    }

    #[test]
    fn range_map_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("sweep0");
        let m = sample_map();
        write_range_map(&stem, &m).unwrap();
        let back = read_range_map(&stem).unwrap();
        assert_eq!(back, m);
        let sc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(with_ext(&stem, "json")).unwrap()).unwrap();
        assert_eq!(sc["H"], 8);
        assert_eq!(sc["W"], 32);
    }

    #[test]
    fn normalized_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("n0");
        let n = normalize_for_diffusion(&sample_map(), 2.0, 50.0).unwrap();
        write_normalized(&stem, &n).unwrap();
        let back = read_normalized(&stem).unwrap();
        assert_eq!(back.valid, n.valid);
        assert_eq!(back.height, 32);
        for (a, b) in back.values.iter().zip(&n.values) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn sweep_blob_round_trip_and_rejects_garbage() {
        let mut s = Sweep::new(vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-4.5, 0.0, 1e-9)], FrameTag::EgoAtStart, 3.25);
        s.intensity = Some(vec![0.5, 0.25]);
        let sweeps = vec![s, Sweep::new(vec![], FrameTag::World, 3.35)];
        let bytes = encode_sweeps(&sweeps);
        assert_eq!(decode_sweeps(&bytes, "x").unwrap(), sweeps);
        assert!(decode_sweeps(&bytes[..bytes.len() - 1], "x").is_err());
        assert!(decode_sweeps(b"garbage", "x").is_err());
    }
}
