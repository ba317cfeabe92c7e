//! Frame sinks: one PNG per frame, or a planar RGB stream with a JSON
//! header.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ConditionFrame;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub frame_count: u32,
}

pub fn frame_file_name(index: u32) -> String {
    format!("frame_{index:06}.png")
}

/// Writes `frame_{index:06}.png` files into `dir`, creating it if needed.
pub fn write_png_frames(dir: &Path, frames: &[ConditionFrame]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    frames
        .iter()
        .map(|f| {
            let path = dir.join(frame_file_name(f.index));
            write_png(&path, f)?;
            Ok(path)
        })
        .collect()
}

pub fn write_png(path: &Path, f: &ConditionFrame) -> Result<()> {
    image::save_buffer(path, &f.rgb, f.width, f.height, image::ExtendedColorType::Rgb8)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}

pub fn encode_png(f: &ConditionFrame) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image_rgb(&f.rgb, f.width, f.height)?;
    Ok(out)
}

trait WriteRgb {
    fn write_image_rgb(self, buf: &[u8], w: u32, h: u32) -> Result<()>;
}

impl<W: Write> WriteRgb for image::codecs::png::PngEncoder<W> {
    fn write_image_rgb(self, buf: &[u8], w: u32, h: u32) -> Result<()> {
        use image::ImageEncoder;
        self.write_image(buf, w, h, image::ExtendedColorType::Rgb8)
            .map_err(|e| Error::InvalidInput(format!("png encoding failed: {e}")))
    }
}

/// Decodes an RGB8 PNG into `(width, height, rgb)`.
pub fn read_png(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    let img = image::open(path)
        .map_err(|e| Error::parse(path.display().to_string(), e))?
        .into_rgb8();
    Ok((img.width(), img.height(), img.into_raw()))
}

/// Writes `<stem>.rgb` (per frame: all R, then all G, then all B) and
/// `<stem>.json`.
pub fn write_raw_video(stem: &Path, frames: &[ConditionFrame], fps: f64) -> Result<RawHeader> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidInput("no frames to write".into()))?;
    let (w, h) = (first.width, first.height);
    if frames.iter().any(|f| f.width != w || f.height != h) {
        return Err(Error::InvalidInput("frames differ in size".into()));
    }
    let header = RawHeader {
        width: w,
        height: h,
        fps,
        frame_count: frames.len() as u32,
    };
    let data_path = stem.with_extension("rgb");
    let file = File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let mut out = BufWriter::new(file);
    let n = w as usize * h as usize;
    let mut plane = vec![0u8; n];
    for f in frames {
        for c in 0..3 {
            for (k, p) in plane.iter_mut().enumerate() {
                *p = f.rgb[k * 3 + c];
            }
            out.write_all(&plane).map_err(|e| Error::io(&data_path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(&data_path, e))?;
    let json_path = stem.with_extension("json");
    std::fs::write(&json_path, serde_json::to_vec_pretty(&header)?).map_err(|e| Error::io(&json_path, e))?;
    Ok(header)
}

/// Reads a planar stream back into interleaved RGB frames.
pub fn read_raw_video(stem: &Path) -> Result<(RawHeader, Vec<Vec<u8>>)> {
    let json_path = stem.with_extension("json");
    let text = std::fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let header: RawHeader =
        serde_json::from_str(&text).map_err(|e| Error::parse(json_path.display().to_string(), e))?;
    let data_path = stem.with_extension("rgb");
    let mut bytes = Vec::new();
    File::open(&data_path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(&data_path, e))?;
    let n = header.width as usize * header.height as usize;
    if bytes.len() != n * 3 * header.frame_count as usize {
        return Err(Error::parse(
            data_path.display().to_string(),
            format!("expected {} bytes, found {}", n * 3 * header.frame_count as usize, bytes.len()),
        ));
    }
    let frames = bytes
        .chunks_exact(n * 3)
        .map(|planes| {
            let mut rgb = vec![0u8; n * 3];
            for c in 0..3 {
                for k in 0..n {
                    rgb[k * 3 + c] = planes[c * n + k];
                }
            }
            rgb
        })
        .collect();
    Ok((header, frames))
}
