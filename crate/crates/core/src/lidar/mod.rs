//! LiDAR point cloud to range map conversion under an explicit spinning
//! sensor model, and back.
//!
//! The forward path is: compensated sweep → [`decompensate`] (per-return
//! emission time and sensor-frame position) → [`encode_range_map`] (nearest
//! elevation row, azimuth-profile-corrected column) → optional
//! [`normalize_for_diffusion`]. [`decode_range_map`] inverts it.

mod decompensate;
pub mod io;
mod labels;
mod normalize;
mod percentile;
mod range_map;
mod sensor;
mod spherical;

use serde::{Deserialize, Serialize};

pub use decompensate::{
    decompensate, recompensate, sensor_pose, DecompensateOptions, Decompensated, TimedPoint,
    DEFAULT_AZIMUTH_TOLERANCE, DEFAULT_ITERATIONS,
};
pub use labels::{
    project_entities_to_range_view, sample_geometry, LabelGrid, RangeLabel, DEFAULT_SAMPLE_STEP,
    NO_LABEL,
};
pub use normalize::{
    denormalize, normalize_for_diffusion, normalize_with_fill, NormalizedRangeMap,
    DEFAULT_FILL_VALUE, ROW_REPEAT,
};
pub use percentile::{compute_percentiles, compute_percentiles_with, LOWER_PERCENTILE, UPPER_PERCENTILE};
pub use range_map::{assign_cell, decode_range_map, encode_range_map, EncodeStats, RangeMap, INVALID_RANGE};
pub use sensor::{wrap_2pi, SensorModel, DEFAULT_COLUMNS, DEFAULT_SPIN_PERIOD, MAX_AZIMUTH_OFFSET_COLUMNS};
pub use spherical::{cart_to_spherical, spherical_to_cart, SphericalPoint};

use crate::error::{Error, Result};
use crate::scene::{Pose, Vec3};

/// Reference frame of a compensated sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameTag {
    World,
    /// Ego body frame at the sweep start time.
    EgoAtStart,
}

/// One motion-compensated LiDAR revolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub points: Vec<Vec3>,
    pub frame: FrameTag,
    pub sweep_start_time: f64,
    pub intensity: Option<Vec<f32>>,
}

impl Sweep {
    pub fn new(points: Vec<Vec3>, frame: FrameTag, sweep_start_time: f64) -> Self {
        Self {
            points,
            frame,
            sweep_start_time,
            intensity: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sweep_start_time.is_finite() {
            return Err(Error::Invariant("sweep start time not finite".into()));
        }
        if let Some(i) = self.points.iter().position(|p| !p.is_finite()) {
            return Err(Error::Invariant(format!("sweep point {i} not finite")));
        }
        if let Some(int) = &self.intensity {
            if int.len() != self.points.len() {
                return Err(Error::Invariant("intensity length differs from point count".into()));
            }
        }
        Ok(())
    }

    /// Points expressed in world coordinates.
    pub fn world_points(&self, ego_track: &[Pose]) -> Result<Vec<Vec3>> {
        match self.frame {
            FrameTag::World => Ok(self.points.clone()),
            FrameTag::EgoAtStart => {
                let t = crate::scene::interpolate_pose(ego_track, self.sweep_start_time)?.transform();
                Ok(self.points.iter().map(|p| t.apply(*p)).collect())
            }
        }
    }
}

/// Convenience: de-compensate a sweep and encode it in one go.
pub fn sweep_to_range_map(
    sweep: &Sweep,
    ego_track: &[Pose],
    sensor: std::sync::Arc<SensorModel>,
) -> Result<(RangeMap, EncodeStats, Vec<usize>)> {
    let dec = decompensate(sweep, ego_track, &sensor, DecompensateOptions::default())?;
    let (map, stats) = encode_range_map(&dec.points, sensor, sweep.sweep_start_time);
    Ok((map, stats, dec.flagged))
}
