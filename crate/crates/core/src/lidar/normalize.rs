use std::sync::Arc;

use super::range_map::{RangeMap, INVALID_RANGE};
use crate::error::{Error, Result};

/// Each beam row is repeated this many times in the normalized grid.
pub const ROW_REPEAT: usize = 4;
pub const DEFAULT_FILL_VALUE: f64 = -1.0;

/// Range map clipped to `[clip_lo, clip_hi]`, affinely mapped to `[-1, 1]`,
/// with every row repeated [`ROW_REPEAT`] times.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedRangeMap {
    pub height: usize,
    pub width: usize,
    /// Row-major `height x width` values in `[-1, 1]`.
    pub values: Vec<f64>,
    /// Validity of the source map, `height / ROW_REPEAT x width`.
    pub valid: Vec<bool>,
    pub clip_lo: f64,
    pub clip_hi: f64,
    pub fill_value: f64,
    sensor: Arc<crate::lidar::SensorModel>,
    sweep_start_time: f64,
}

fn check_bounds(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Config(format!(
            "degenerate clip bounds [{lo}, {hi}]"
        )));
    }
    Ok(())
}

pub fn normalize_for_diffusion(rm: &RangeMap, clip_lo: f64, clip_hi: f64) -> Result<NormalizedRangeMap> {
    normalize_with_fill(rm, clip_lo, clip_hi, DEFAULT_FILL_VALUE)
}

pub fn normalize_with_fill(
    rm: &RangeMap,
    clip_lo: f64,
    clip_hi: f64,
    fill_value: f64,
) -> Result<NormalizedRangeMap> {
    check_bounds(clip_lo, clip_hi)?;
    if !(-1.0..=1.0).contains(&fill_value) {
        return Err(Error::Config(format!("fill value {fill_value} outside [-1, 1]")));
    }
    let (h, w) = (rm.height(), rm.width());
    let span = clip_hi - clip_lo;
    let row_values: Vec<f64> = rm
        .ranges()
        .iter()
        .zip(rm.validity())
        .map(|(&r, &v)| {
            if v {
                let c = (r as f64).clamp(clip_lo, clip_hi);
                (2.0 * (c - clip_lo) / span - 1.0).clamp(-1.0, 1.0)
            } else {
                fill_value
            }
        })
        .collect();
    let mut values = Vec::with_capacity(h * ROW_REPEAT * w);
    for row in row_values.chunks_exact(w) {
        for _ in 0..ROW_REPEAT {
            values.extend_from_slice(row);
        }
    }
    Ok(NormalizedRangeMap {
        height: h * ROW_REPEAT,
        width: w,
        values,
        valid: rm.validity().to_vec(),
        clip_lo,
        clip_hi,
        fill_value,
        sensor: rm.sensor().clone(),
        sweep_start_time: rm.sweep_start_time(),
    })
}

impl NormalizedRangeMap {
    /// Rebuilds a normalized map from values read back from storage.
    pub fn from_parts(
        sensor: Arc<crate::lidar::SensorModel>,
        sweep_start_time: f64,
        values: Vec<f64>,
        valid: Vec<bool>,
        clip_lo: f64,
        clip_hi: f64,
        fill_value: f64,
    ) -> Result<Self> {
        check_bounds(clip_lo, clip_hi)?;
        let (h, w) = (sensor.beam_count(), sensor.width());
        if values.len() != h * ROW_REPEAT * w || valid.len() != h * w {
            return Err(Error::InvalidInput(format!(
                "normalized map expects {}x{w} values and {h}x{w} mask",
                h * ROW_REPEAT
            )));
        }
        if values.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::Invariant("normalized values must lie in [-1, 1]".into()));
        }
        Ok(Self {
            height: h * ROW_REPEAT,
            width: w,
            values,
            valid,
            clip_lo,
            clip_hi,
            fill_value,
            sensor,
            sweep_start_time,
        })
    }

    pub fn sensor(&self) -> &Arc<crate::lidar::SensorModel> {
        &self.sensor
    }

    pub fn sweep_start_time(&self) -> f64 {
        self.sweep_start_time
    }

    /// Collapses each row group to its first row and inverts the affine
    /// map.
    pub fn denormalize(&self) -> Result<RangeMap> {
        let w = self.width;
        let h = self.height / ROW_REPEAT;
        let span = self.clip_hi - self.clip_lo;
        let mut ranges = vec![INVALID_RANGE; h * w];
        for row in 0..h {
            let src = &self.values[row * ROW_REPEAT * w..row * ROW_REPEAT * w + w];
            for (col, &v) in src.iter().enumerate() {
                if self.valid[row * w + col] {
                    ranges[row * w + col] = (self.clip_lo + (v + 1.0) * 0.5 * span) as f32;
                }
            }
        }
        RangeMap::from_parts(self.sensor.clone(), self.sweep_start_time, ranges, self.valid.clone(), None)
    }
}

pub fn denormalize(nrm: &NormalizedRangeMap) -> Result<RangeMap> {
    nrm.denormalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lidar::SensorModel;

    fn map_with(values: &[(usize, f32)]) -> RangeMap {
        let s = Arc::new(SensorModel::new(vec![0.1, 0.0], vec![0.0; 2], 8, 0.1, 0.5, 200.0).unwrap());
        let mut ranges = vec![INVALID_RANGE; 16];
        let mut valid = vec![false; 16];
        for &(i, r) in values {
            ranges[i] = r;
            valid[i] = true;
        }
        RangeMap::from_parts(s, 0.0, ranges, valid, None).unwrap()
    }

    #[test]
    fn endpoints_and_midpoint() {
        let m = map_with(&[(0, 10.0), (1, 90.0), (2, 50.0), (3, 1.0), (4, 150.0)]);
        let n = normalize_for_diffusion(&m, 10.0, 90.0).unwrap();
        assert_eq!(n.values[0], -1.0);
        assert_eq!(n.values[1], 1.0);
        assert_eq!(n.values[2], 0.0);
        assert_eq!(n.values[3], -1.0);
        assert_eq!(n.values[4], 1.0);
        assert_eq!(n.values[5], DEFAULT_FILL_VALUE);
    }

    #[test]
    fn rows_repeat_four_times() {
        let m = map_with(&[(0, 20.0), (9, 30.0)]);
        let n = normalize_for_diffusion(&m, 10.0, 90.0).unwrap();
        assert_eq!(n.height, 8);
        for r in 0..4 {
            assert_eq!(n.values[r * 8], n.values[0]);
            assert_eq!(n.values[(4 + r) * 8 + 1], n.values[4 * 8 + 1]);
        }
    }

    #[test]
    fn round_trip_clamps() {
        let m = map_with(&[(0, 20.25), (1, 5.0), (2, 120.0), (7, 89.999)]);
        let back = normalize_for_diffusion(&m, 10.0, 90.0).unwrap().denormalize().unwrap();
        assert_eq!(back.validity(), m.validity());
        for ((_, _, a), (_, _, b)) in back.valid_cells().zip(m.valid_cells()) {
            let clamped = (b as f64).clamp(10.0, 90.0);
            assert!((a as f64 - clamped).abs() < 1e-6, "{a} vs {clamped}");
        }
    }

    #[test]
    fn degenerate_bounds() {
        let m = map_with(&[]);
        assert!(matches!(normalize_for_diffusion(&m, 5.0, 5.0), Err(Error::Config(_))));
        assert!(normalize_for_diffusion(&m, 6.0, 5.0).is_err());
    }
}
