//! HDMap and box labels in range-map view.

use std::sync::Arc;

use serde::Serialize;

use super::decompensate::{decompensate, DecompensateOptions};
use super::range_map::assign_cell;
use super::sensor::SensorModel;
use super::spherical::cart_to_spherical_unchecked;
use super::{FrameTag, Sweep};
use crate::error::{Error, Result};
use crate::scene::{Cuboid, Geometry, MapClass, MapEntity, ObjectCategory, Pose, Vec3, CUBOID_EDGES};

pub const DEFAULT_SAMPLE_STEP: f64 = 0.1;

/// Label value for cells with no sampled geometry.
pub const NO_LABEL: u16 = u16::MAX;

/// Class carried by a labeled cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum RangeLabel {
    Map(MapClass),
    Object(ObjectCategory),
}

impl RangeLabel {
    /// Map classes take codes `0..9`, object categories `9..21`.
    pub fn code(self) -> u16 {
        match self {
            RangeLabel::Map(c) => MapClass::ALL.iter().position(|x| *x == c).unwrap() as u16,
            RangeLabel::Object(c) => {
                (MapClass::ALL.len() + ObjectCategory::ALL.iter().position(|x| *x == c).unwrap()) as u16
            }
        }
    }

    pub fn from_code(code: u16) -> Option<RangeLabel> {
        let i = code as usize;
        if i < MapClass::ALL.len() {
            Some(RangeLabel::Map(MapClass::ALL[i]))
        } else {
            ObjectCategory::ALL
                .get(i - MapClass::ALL.len())
                .map(|c| RangeLabel::Object(*c))
        }
    }
}

/// Range-map shaped class grid; `ranges` holds the winning sample's range.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u16>,
    pub ranges: Vec<f32>,
}

impl LabelGrid {
    pub fn get(&self, row: usize, col: usize) -> Option<RangeLabel> {
        RangeLabel::from_code(self.labels[row * self.width + col])
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|l| **l != NO_LABEL).count()
    }
}

/// Points every `step` meters along a segment, including both ends.
fn sample_segment(a: Vec3, b: Vec3, step: f64, out: &mut Vec<Vec3>) {
    let n = ((b - a).norm() / step).ceil().max(1.0) as usize;
    for i in 0..=n {
        out.push(a.lerp(b, i as f64 / n as f64));
    }
}

/// Dense points along the geometry's edges.
pub fn sample_geometry(geometry: &Geometry, step: f64) -> Vec<Vec3> {
    let mut out = Vec::new();
    match geometry {
        Geometry::Polyline { vertices } => {
            for w in vertices.windows(2) {
                sample_segment(w[0], w[1], step, &mut out);
            }
        }
        Geometry::Polygon { vertices } => {
            for i in 0..vertices.len() {
                sample_segment(vertices[i], vertices[(i + 1) % vertices.len()], step, &mut out);
            }
        }
        Geometry::Cuboid(c) => sample_cuboid(c, step, &mut out),
    }
    out
}

fn sample_cuboid(c: &Cuboid, step: f64, out: &mut Vec<Vec3>) {
    let corners = c.corners();
    for [a, b] in CUBOID_EDGES {
        sample_segment(corners[a], corners[b], step, out);
    }
}

/// Samples map entities and object boxes (world frame), reverses the motion
/// compensation of a sweep starting at `sweep_start`, and rasterizes the
/// samples into a label grid where the nearest sample wins each cell.
pub fn project_entities_to_range_view(
    entities: &[MapEntity],
    objects: &[(ObjectCategory, Cuboid)],
    ego_track: &[Pose],
    sensor: &Arc<SensorModel>,
    sweep_start: f64,
    step: f64,
) -> Result<LabelGrid> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Config(format!("sample step must be positive, got {step}")));
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for e in entities {
        let s = sample_geometry(e.geometry(), step);
        labels.extend(std::iter::repeat_n(RangeLabel::Map(e.class()).code(), s.len()));
        points.extend(s);
    }
    for (cat, c) in objects {
        let mut s = Vec::new();
        sample_cuboid(c, step, &mut s);
        labels.extend(std::iter::repeat_n(RangeLabel::Object(*cat).code(), s.len()));
        points.extend(s);
    }
    let (h, w) = (sensor.beam_count(), sensor.width());
    let mut grid = LabelGrid {
        height: h,
        width: w,
        labels: vec![NO_LABEL; h * w],
        ranges: vec![f32::INFINITY; h * w],
    };
    if points.is_empty() {
        return Ok(grid);
    }
    let sweep = Sweep::new(points, FrameTag::World, sweep_start);
    let dec = decompensate(&sweep, ego_track, sensor, DecompensateOptions::default())?;
    let mut flagged = dec.flagged.iter().peekable();
    let kept = (0..labels.len()).filter(|i| {
        if flagged.peek() == Some(&i) {
            flagged.next();
            false
        } else {
            true
        }
    });
    for (tp, idx) in dec.points.iter().zip(kept) {
        let s = cart_to_spherical_unchecked(tp.point);
        if s.r < sensor.range_min || s.r > sensor.range_max {
            continue;
        }
        let (row, col) = assign_cell(sensor, &s);
        let i = row * w + col;
        let r = s.r as f32;
        if r < grid.ranges[i] {
            grid.ranges[i] = r;
            grid.labels[i] = labels[idx];
        }
    }
    Ok(grid)
}
