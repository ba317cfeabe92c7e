//! Reversal of LiDAR motion compensation.
//!
//! A compensated sweep stores every return in one reference frame. To place
//! a return in the range map we need the sensor pose at the instant it was
//! emitted, which itself depends on the return's azimuth. The two are solved
//! jointly by iterating on the emission time: the first update is the plain
//! fixed point t = start + offset(φ(t)), later ones take a secant step on its
//! residual. Close returns at speed contract too slowly for the plain form.

use std::f64::consts::{PI, TAU};

use super::sensor::SensorModel;
use super::spherical::cart_to_spherical_unchecked;
use super::{FrameTag, Sweep};
use crate::error::{Error, Result};
use crate::scene::{interpolate_pose, Pose, RigidTransform, Vec3};

pub const DEFAULT_ITERATIONS: usize = 3;
pub const DEFAULT_AZIMUTH_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompensateOptions {
    pub iterations: usize,
    /// Largest azimuth mismatch accepted at the final emission time,
    /// radians.
    pub azimuth_tolerance: f64,
}

impl Default for DecompensateOptions {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            azimuth_tolerance: DEFAULT_AZIMUTH_TOLERANCE,
        }
    }
}

/// A return expressed in the sensor frame at its emission time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPoint {
    pub time: f64,
    pub point: Vec3,
    pub intensity: Option<f32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Decompensated {
    pub points: Vec<TimedPoint>,
    /// Indices of input points whose azimuth did not settle; excluded from
    /// `points`.
    pub flagged: Vec<usize>,
}

/// Pose of the sensor in the world at time `t`.
pub fn sensor_pose(track: &[Pose], sensor: &SensorModel, t: f64) -> Result<RigidTransform> {
    Ok(interpolate_pose(track, t)?
        .transform()
        .compose(&sensor.ego_from_sensor))
}

pub(crate) fn check_coverage(track: &[Pose], start: f64, end: f64) -> Result<()> {
    if track.len() < 2 {
        return Err(Error::Precondition("ego track needs at least 2 poses".into()));
    }
    let (a, b) = (track[0].timestamp, track[track.len() - 1].timestamp);
    if start < a {
        return Err(Error::OutOfRange { t: start, start: a, end: b });
    }
    if end > b {
        return Err(Error::OutOfRange { t: end, start: a, end: b });
    }
    Ok(())
}

/// `a - b` wrapped to [-π, π).
fn signed_diff(a: f64, b: f64) -> f64 {
    (a - b + PI).rem_euclid(2.0 * PI) - PI
}

/// Recovers the emission time and sensor-frame coordinates of every return
/// in a compensated sweep.
pub fn decompensate(
    sweep: &Sweep,
    ego_track: &[Pose],
    sensor: &SensorModel,
    options: DecompensateOptions,
) -> Result<Decompensated> {
    let start = sweep.sweep_start_time;
    check_coverage(ego_track, start, start + sensor.spin_period)?;
    let world_from_ref = match sweep.frame {
        FrameTag::World => RigidTransform::IDENTITY,
        FrameTag::EgoAtStart => interpolate_pose(ego_track, start)?.transform(),
    };
    let start_inv = sensor_pose(ego_track, sensor, start)?.inverse();

    let mut out = Decompensated::default();
    for (idx, &p) in sweep.points.iter().enumerate() {
        let p_world = world_from_ref.apply(p);
        let azimuth = corrected(sensor, start_inv.apply(p_world));
        let mut best = solve(p_world, azimuth, start, ego_track, sensor, options)?;
        // Near the seam the start-pose azimuth may sit on the wrong side of
        // it: the return could belong to the end of the sweep. Try both
        // branches and keep the one whose elevation lands on a beam.
        if azimuth < SEAM_MARGIN || azimuth > TAU - SEAM_MARGIN {
            let other_seed = if azimuth < SEAM_MARGIN { azimuth + TAU } else { azimuth - TAU };
            let other = solve(p_world, other_seed, start, ego_track, sensor, options)?;
            if other.better_than(&best, options.azimuth_tolerance) {
                best = other;
            }
        }
        if best.residual > options.azimuth_tolerance {
            out.flagged.push(idx);
            continue;
        }
        out.points.push(TimedPoint {
            time: best.time,
            point: best.local,
            intensity: sweep.intensity.as_ref().map(|v| v[idx]),
        });
    }
    Ok(out)
}

/// Half-width of the band around azimuth 0 in which both seam branches are
/// tried, radians.
const SEAM_MARGIN: f64 = 0.25;

struct Solution {
    time: f64,
    local: Vec3,
    /// Azimuth mismatch of the returned emission time, radians.
    residual: f64,
    /// Distance of the point's elevation from its nearest beam.
    elevation_residual: f64,
    /// Distance of the emission time from the nearest column firing time,
    /// in columns.
    firing_residual: f64,
}

impl Solution {
    fn better_than(&self, other: &Solution, tol: f64) -> bool {
        match (self.residual <= tol, other.residual <= tol) {
            (true, false) => true,
            (false, true) => false,
            // Horizontal beams under planar motion hit the same elevation on
            // both branches; fall back to the firing schedule.
            _ if (self.elevation_residual - other.elevation_residual).abs() < 1e-9 => {
                self.firing_residual < other.firing_residual - 1e-9
            }
            _ => self.elevation_residual < other.elevation_residual,
        }
    }
}

fn solve(
    p_world: Vec3,
    seed_azimuth: f64,
    start: f64,
    ego_track: &[Pose],
    sensor: &SensorModel,
    options: DecompensateOptions,
) -> Result<Solution> {
    let (free, rows) = iterate(p_world, seed_azimuth, None, start, ego_track, sensor, options)?;
    if free.residual <= options.azimuth_tolerance || rows.0 == rows.1 {
        return Ok(free);
    }
    // A point between two beams can make the nearest row, and with it the
    // azimuth correction, alternate. Solve with each row held fixed and keep
    // a fixed point that is consistent with its own row.
    let mut best = free;
    for row in [rows.0, rows.1] {
        let (cand, _) = iterate(p_world, seed_azimuth, Some(row), start, ego_track, sensor, options)?;
        let s = cart_to_spherical_unchecked(cand.local);
        if sensor.nearest_row(s.theta) == row && cand.better_than(&best, options.azimuth_tolerance) {
            best = cand;
        }
    }
    Ok(best)
}

/// Fixed-point iteration on the emission time. Returns the solution and the
/// rows used by the last two iterations.
fn iterate(
    p_world: Vec3,
    seed_azimuth: f64,
    fixed_row: Option<usize>,
    start: f64,
    ego_track: &[Pose],
    sensor: &SensorModel,
    options: DecompensateOptions,
) -> Result<(Solution, (usize, usize))> {
    let end = start + sensor.spin_period;
    let mut azimuth = seed_azimuth;
    let mut time = (start + sensor.time_offset(azimuth)).clamp(start, end);
    let mut rows = (usize::MAX, usize::MAX);
    // Previous (time, residual) pair for the secant step.
    let mut prev: Option<(f64, f64)> = None;
    for _ in 0..options.iterations.max(1) {
        let local = sensor_pose(ego_track, sensor, time)?.inverse().apply(p_world);
        let s = cart_to_spherical_unchecked(local);
        let row = fixed_row.unwrap_or_else(|| sensor.nearest_row(s.theta));
        rows = (rows.1, row);
        // Unwrap next to the previous estimate so the residual stays
        // continuous across the seam.
        let wrapped = sensor.corrected_azimuth(row, s.phi);
        let next = azimuth + signed_diff(wrapped, azimuth);
        // Residual of t = start + offset(φ(t)).
        let g = start + sensor.time_offset(next) - time;
        let fixed_point = time + g;
        let secant = prev.and_then(|(t0, g0)| {
            let slope = (g - g0) / (time - t0);
            let t = time - g / slope;
            // Use the secant step only when the map is contracting.
            (slope.is_finite() && slope < -0.1 && t.is_finite()).then_some(t)
        });
        prev = Some((time, g));
        time = secant.unwrap_or(fixed_point).clamp(start, end);
        azimuth = (time - start) / sensor.spin_period * TAU;
    }
    if rows.0 == usize::MAX {
        rows.0 = rows.1;
    }
    // Final sensor-frame point at the settled emission time.
    let local = sensor_pose(ego_track, sensor, time)?.inverse().apply(p_world);
    let s = cart_to_spherical_unchecked(local);
    let row = sensor.nearest_row(s.theta);
    let used_row = fixed_row.unwrap_or(row);
    let residual = signed_diff(sensor.corrected_azimuth(used_row, s.phi), azimuth).abs();
    let phase = (time - start) / sensor.spin_period * sensor.columns as f64 - 0.5;
    let solution = Solution {
        time,
        local,
        residual,
        elevation_residual: (s.theta - sensor.elevation_profile[row]).abs(),
        firing_residual: (phase - phase.round()).abs(),
    };
    Ok((solution, rows))
}

/// Azimuth with the nearest beam's offset removed.
fn corrected(sensor: &SensorModel, local: Vec3) -> f64 {
    let s = cart_to_spherical_unchecked(local);
    let row = sensor.nearest_row(s.theta);
    sensor.corrected_azimuth(row, s.phi)
}

/// Re-applies motion compensation: maps sensor-frame points at their
/// emission times into the world.
pub fn recompensate(points: &[TimedPoint], ego_track: &[Pose], sensor: &SensorModel) -> Result<Vec<Vec3>> {
    points
        .iter()
        .map(|tp| Ok(sensor_pose(ego_track, sensor, tp.time)?.apply(tp.point)))
        .collect()
}
