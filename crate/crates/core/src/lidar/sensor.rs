use std::f64::consts::{PI, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::RigidTransform;

pub const DEFAULT_COLUMNS: u32 = 2048;
pub const DEFAULT_SPIN_PERIOD: f64 = 0.1;

/// Bound on per-beam azimuth offsets, in columns: `|δφ| < 2π/W · c`.
pub const MAX_AZIMUTH_OFFSET_COLUMNS: f64 = 32.0;

fn default_columns() -> u32 {
    DEFAULT_COLUMNS
}

fn default_spin_period() -> f64 {
    DEFAULT_SPIN_PERIOD
}

/// Beam geometry of a spinning LiDAR.
///
/// Row `i` of a range map corresponds to beam `i`; elevations are sorted in
/// descending order so row 0 is the top beam. The sensor spins with
/// increasing azimuth, starting at azimuth 0 at `sweep_start_time`; column
/// `c` fires over `[c, c + 1) · period / W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    /// Per-beam elevation angle, radians, strictly descending.
    pub elevation_profile: Vec<f64>,
    /// Per-beam horizontal offset from the column azimuth, radians.
    pub azimuth_profile: Vec<f64>,
    #[serde(default = "default_columns")]
    pub columns: u32,
    #[serde(default = "default_spin_period")]
    pub spin_period: f64,
    pub range_min: f64,
    pub range_max: f64,
    /// Sensor mounting on the ego body.
    #[serde(default)]
    pub ego_from_sensor: RigidTransform,
}

impl SensorModel {
    pub fn new(
        elevation_profile: Vec<f64>,
        azimuth_profile: Vec<f64>,
        columns: u32,
        spin_period: f64,
        range_min: f64,
        range_max: f64,
    ) -> Result<Self> {
        let s = SensorModel {
            elevation_profile,
            azimuth_profile,
            columns,
            spin_period,
            range_min,
            range_max,
            ego_from_sensor: RigidTransform::IDENTITY,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let model: SensorModel = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.elevation_profile.len();
        if n == 0 {
            return Err(Error::Invariant("sensor needs at least one beam".into()));
        }
        if self.azimuth_profile.len() != n {
            return Err(Error::Invariant(format!(
                "azimuth profile has {} entries for {n} beams",
                self.azimuth_profile.len()
            )));
        }
        if self.columns == 0 {
            return Err(Error::Invariant("sensor needs at least one column".into()));
        }
        if !(self.spin_period.is_finite() && self.spin_period > 0.0) {
            return Err(Error::Invariant("spin period must be positive".into()));
        }
        if !(self.range_min.is_finite()
            && self.range_max.is_finite()
            && self.range_min >= 0.0
            && self.range_min < self.range_max)
        {
            return Err(Error::Invariant(format!(
                "invalid range limits [{}, {}]",
                self.range_min, self.range_max
            )));
        }
        for e in &self.elevation_profile {
            if !e.is_finite() || e.abs() > PI / 2.0 {
                return Err(Error::Invariant(format!("elevation {e} outside [-pi/2, pi/2]")));
            }
        }
        if self.elevation_profile.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Invariant(
                "elevation profile must be strictly descending".into(),
            ));
        }
        let bound = self.column_width() * MAX_AZIMUTH_OFFSET_COLUMNS;
        for d in &self.azimuth_profile {
            if !d.is_finite() || d.abs() >= bound {
                return Err(Error::Invariant(format!(
                    "azimuth offset {d} exceeds bound {bound}"
                )));
            }
        }
        if !self.ego_from_sensor.is_finite() {
            return Err(Error::Invariant("non-finite sensor mounting".into()));
        }
        self.ego_from_sensor.rotation.check_unit()
    }

    pub fn beam_count(&self) -> usize {
        self.elevation_profile.len()
    }

    pub fn width(&self) -> usize {
        self.columns as usize
    }

    /// Angular width of one column, radians.
    pub fn column_width(&self) -> f64 {
        TAU / self.columns as f64
    }

    /// Row whose elevation is nearest to `theta`. Ties go to the lower row
    /// index.
    pub fn nearest_row(&self, theta: f64) -> usize {
        let e = &self.elevation_profile;
        // First index with elevation <= theta (profile is descending).
        let i = e.partition_point(|&x| x > theta);
        if i == 0 {
            return 0;
        }
        if i == e.len() {
            return e.len() - 1;
        }
        if (theta - e[i]).abs() < (e[i - 1] - theta).abs() {
            i
        } else {
            i - 1
        }
    }

    /// Azimuth with the beam's offset removed, wrapped to `[0, 2π)`.
    pub fn corrected_azimuth(&self, row: usize, phi: f64) -> f64 {
        wrap_2pi(phi - self.azimuth_profile[row])
    }

    pub fn column_of(&self, corrected_azimuth: f64) -> usize {
        let c = (corrected_azimuth / self.column_width()).floor() as i64;
        c.clamp(0, self.columns as i64 - 1) as usize
    }

    /// Emission time offset from sweep start for a corrected azimuth.
    pub fn time_offset(&self, corrected_azimuth: f64) -> f64 {
        corrected_azimuth / TAU * self.spin_period
    }

    /// Representative azimuth of a cell: the column center plus the beam
    /// offset.
    pub fn cell_azimuth(&self, row: usize, col: usize) -> f64 {
        (col as f64 + 0.5) * self.column_width() + self.azimuth_profile[row]
    }

    /// Emission time offset of a column center.
    pub fn column_time_offset(&self, col: usize) -> f64 {
        (col as f64 + 0.5) / self.columns as f64 * self.spin_period
    }

    /// A 128-beam model with elevations dense near the horizon and sparse at
    /// the extremes (+15° down to -25°) and an alternating zig-zag azimuth
    /// profile. Useful for fixtures; real profiles come from calibration.
    pub fn synthetic_zigzag(beams: usize, columns: u32) -> SensorModel {
        let (top, bottom) = (15f64.to_radians(), (-25f64).to_radians());
        let (dense_hi, dense_lo) = (2f64.to_radians(), (-6f64).to_radians());
        let n = beams.max(2);
        let dense = n / 2;
        let upper = (n - dense) * 3 / 8;
        let lower = n - dense - upper;
        let mut elev = Vec::with_capacity(n);
        // Upper sparse band, quadratic spacing toward the top.
        for i in 0..upper {
            let s = 1.0 - i as f64 / upper as f64;
            elev.push(dense_hi + (top - dense_hi) * s * s);
        }
        for i in 0..dense {
            let s = i as f64 / dense as f64;
            elev.push(dense_hi + (dense_lo - dense_hi) * s);
        }
        for i in 0..lower {
            let s = (i + 1) as f64 / lower as f64;
            elev.push(dense_lo + (bottom - dense_lo) * s * s);
        }
        let col = TAU / columns as f64;
        let azim = (0..n)
            .map(|i| {
                let phase = (i % 4) as f64;
                (phase - 1.5) * 1.3 * col
            })
            .collect();
        SensorModel {
            elevation_profile: elev,
            azimuth_profile: azim,
            columns,
            spin_period: DEFAULT_SPIN_PERIOD,
            range_min: 0.5,
            range_max: 200.0,
            ego_from_sensor: RigidTransform::IDENTITY,
        }
    }
}

pub fn wrap_2pi(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}
