use std::sync::Arc;

use super::decompensate::{check_coverage, sensor_pose, TimedPoint};
use super::sensor::SensorModel;
use super::spherical::{cart_to_spherical_unchecked, spherical_to_cart_unchecked, SphericalPoint};
use super::{FrameTag, Sweep};
use crate::error::{Error, Result};
use crate::scene::{interpolate_pose, Pose};

/// Range stored in cells without a return.
pub const INVALID_RANGE: f32 = -1.0;

/// Beam-row by azimuth-column grid of radial distances.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeMap {
    height: usize,
    width: usize,
    ranges: Vec<f32>,
    valid: Vec<bool>,
    intensity: Option<Vec<f32>>,
    sensor: Arc<SensorModel>,
    sweep_start_time: f64,
}

impl RangeMap {
    /// An all-invalid map shaped for `sensor`.
    pub fn empty(sensor: Arc<SensorModel>, sweep_start_time: f64) -> Self {
        let (h, w) = (sensor.beam_count(), sensor.width());
        RangeMap {
            height: h,
            width: w,
            ranges: vec![INVALID_RANGE; h * w],
            valid: vec![false; h * w],
            intensity: None,
            sensor,
            sweep_start_time,
        }
    }

    /// Builds a map from raw row-major ranges and a validity mask.
    pub fn from_parts(
        sensor: Arc<SensorModel>,
        sweep_start_time: f64,
        ranges: Vec<f32>,
        valid: Vec<bool>,
        intensity: Option<Vec<f32>>,
    ) -> Result<Self> {
        let (h, w) = (sensor.beam_count(), sensor.width());
        if ranges.len() != h * w || valid.len() != h * w {
            return Err(Error::InvalidInput(format!(
                "range map expects {h}x{w} cells, got {} ranges / {} mask entries",
                ranges.len(),
                valid.len()
            )));
        }
        if intensity.as_ref().is_some_and(|i| i.len() != h * w) {
            return Err(Error::InvalidInput("intensity grid has the wrong size".into()));
        }
        let (lo, hi) = (sensor.range_min, sensor.range_max);
        let mut ranges = ranges;
        for (r, &v) in ranges.iter_mut().zip(&valid) {
            if v {
                let rr = *r as f64;
                if !rr.is_finite() || rr < lo || rr > hi {
                    return Err(Error::Invariant(format!(
                        "valid cell range {rr} outside [{lo}, {hi}]"
                    )));
                }
            } else {
                *r = INVALID_RANGE;
            }
        }
        Ok(RangeMap {
            height: h,
            width: w,
            ranges,
            valid,
            intensity,
            sensor,
            sweep_start_time,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn sensor(&self) -> &Arc<SensorModel> {
        &self.sensor
    }

    pub fn sweep_start_time(&self) -> f64 {
        self.sweep_start_time
    }

    pub fn ranges(&self) -> &[f32] {
        &self.ranges
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn intensity(&self) -> Option<&[f32]> {
        self.intensity.as_deref()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f32> {
        let i = row * self.width + col;
        self.valid[i].then(|| self.ranges[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Iterates `(row, col, range)` over valid cells.
    pub fn valid_cells(&self) -> impl Iterator<Item = (usize, usize, f32)> + '_ {
        let w = self.width;
        self.valid
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(move |(i, _)| (i / w, i % w, self.ranges[i]))
    }

    pub fn valid_ranges(&self) -> impl Iterator<Item = f32> + '_ {
        self.valid_cells().map(|(_, _, r)| r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct EncodeStats {
    pub encoded: usize,
    pub dropped_out_of_range: usize,
    pub dropped_non_finite: usize,
    /// Points that lost a cell to a nearer return.
    pub collisions: usize,
}

/// Cell of a sensor-frame point: nearest elevation row, and the column of
/// its azimuth after removing that beam's offset.
pub fn assign_cell(sensor: &SensorModel, s: &SphericalPoint) -> (usize, usize) {
    let row = sensor.nearest_row(s.theta);
    let col = sensor.column_of(sensor.corrected_azimuth(row, s.phi));
    (row, col)
}

/// Rasterizes de-compensated returns into a range map. On a cell collision
/// the smaller range wins.
pub fn encode_range_map(
    points: &[TimedPoint],
    sensor: Arc<SensorModel>,
    sweep_start_time: f64,
) -> (RangeMap, EncodeStats) {
    let mut map = RangeMap::empty(sensor.clone(), sweep_start_time);
    let mut stats = EncodeStats::default();
    let has_intensity = points.iter().any(|p| p.intensity.is_some());
    let mut intensity = has_intensity.then(|| vec![0.0f32; map.ranges.len()]);
    for tp in points {
        if !tp.point.is_finite() {
            stats.dropped_non_finite += 1;
            continue;
        }
        let s = cart_to_spherical_unchecked(tp.point);
        if s.r < sensor.range_min || s.r > sensor.range_max {
            stats.dropped_out_of_range += 1;
            continue;
        }
        let (row, col) = assign_cell(&sensor, &s);
        let i = row * map.width + col;
        let r = s.r as f32;
        if map.valid[i] {
            stats.collisions += 1;
            if r >= map.ranges[i] {
                continue;
            }
        } else {
            stats.encoded += 1;
        }
        map.valid[i] = true;
        map.ranges[i] = r;
        if let (Some(buf), Some(v)) = (intensity.as_mut(), tp.intensity) {
            buf[i] = v;
        }
    }
    map.intensity = intensity;
    (map, stats)
}

/// Turns every valid cell back into a compensated point: spherical
/// coordinates from the cell's beam elevation and column-center azimuth,
/// placed in the world with the sensor pose at the column's emission time.
pub fn decode_range_map(map: &RangeMap, ego_track: &[Pose], frame: FrameTag) -> Result<Sweep> {
    let sensor = map.sensor.as_ref();
    let start = map.sweep_start_time;
    if map.valid_count() == 0 {
        return Ok(Sweep::new(Vec::new(), frame, start));
    }
    check_coverage(ego_track, start, start + sensor.spin_period)?;
    let ref_from_world = match frame {
        FrameTag::World => crate::scene::RigidTransform::IDENTITY,
        FrameTag::EgoAtStart => interpolate_pose(ego_track, start)?.transform().inverse(),
    };
    let mut points = Vec::with_capacity(map.valid_count());
    let mut intensity = map.intensity.as_ref().map(|_| Vec::new());
    let mut pose_cache: Vec<Option<crate::scene::RigidTransform>> = vec![None; map.width];
    for (row, col, r) in map.valid_cells() {
        let pose = match pose_cache[col] {
            Some(p) => p,
            None => {
                let p = sensor_pose(ego_track, sensor, start + sensor.column_time_offset(col))?;
                pose_cache[col] = Some(p);
                p
            }
        };
        let local = spherical_to_cart_unchecked(SphericalPoint {
            r: r as f64,
            phi: sensor.cell_azimuth(row, col),
            theta: sensor.elevation_profile[row],
        });
        points.push(ref_from_world.apply(pose.apply(local)));
        if let (Some(out), Some(src)) = (intensity.as_mut(), map.intensity.as_ref()) {
            out.push(src[row * map.width + col]);
        }
    }
    let mut sweep = Sweep::new(points, frame, start);
    sweep.intensity = intensity;
    Ok(sweep)
}
