//! Pinhole and f-theta camera models.
//!
//! Camera frame convention: +z along the optical axis, +x to the right of
//! the image, +y down. Continuous pixel coordinates put pixel `(i, j)` over
//! `[i, i + 1) x [j, j + 1)`.

mod rectify;

use serde::{Deserialize, Serialize};

pub use rectify::{rectify_spec, RemapTable};

use crate::error::{Error, Result};
use crate::scene::{Pose, RigidTransform, Vec3};

/// Newton/bisection stopping tolerance for the f-theta inverse, radians.
pub const FTHETA_INVERSE_TOLERANCE: f64 = 1e-10;
pub const FTHETA_INVERSE_MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl PinholeIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::Invariant(
                "pinhole focal lengths must be finite and positive".into(),
            ));
        }
        check_principal_point(self.cx, self.cy, self.width, self.height)
    }

    /// Full horizontal field of view in radians.
    pub fn horizontal_fov(&self) -> f64 {
        (self.cx / self.fx).atan() + ((self.width as f64 - self.cx) / self.fx).atan()
    }
}

/// f-theta fisheye: image radius `r = k1 θ + k2 θ² + ... + k5 θ⁵` pixels for
/// a ray at incidence angle `θ` from the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FThetaIntrinsics {
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub k: [f64; 5],
    pub max_fov_half_angle: f64,
}

const MONOTONIC_SAMPLES: usize = 1000;

impl FThetaIntrinsics {
    /// Linear f-theta `r = f θ`.
    pub fn equidistant(f: f64, cx: f64, cy: f64, width: u32, height: u32, max_fov_half_angle: f64) -> Self {
        Self {
            cx,
            cy,
            width,
            height,
            k: [f, 0.0, 0.0, 0.0, 0.0],
            max_fov_half_angle,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.k.iter().all(|k| k.is_finite()) {
            return Err(Error::Invariant("f-theta coefficients must be finite".into()));
        }
        let m = self.max_fov_half_angle;
        if !m.is_finite() || m <= 0.0 || m > std::f64::consts::PI {
            return Err(Error::Invariant(format!(
                "f-theta max_fov_half_angle {m} must lie in (0, pi]"
            )));
        }
        check_principal_point(self.cx, self.cy, self.width, self.height)?;
        let mut prev = self.radius(0.0);
        for i in 1..=MONOTONIC_SAMPLES {
            let theta = m * i as f64 / MONOTONIC_SAMPLES as f64;
            let r = self.radius(theta);
            if r <= prev || self.radius_derivative(theta) <= 0.0 {
                return Err(Error::Invariant(format!(
                    "f-theta polynomial not strictly increasing near θ = {theta}"
                )));
            }
            prev = r;
        }
        if self.radius_derivative(0.0) <= 0.0 {
            return Err(Error::Invariant(
                "f-theta polynomial must have positive slope at θ = 0".into(),
            ));
        }
        Ok(())
    }

    pub fn radius(&self, theta: f64) -> f64 {
        // Horner on k1 θ + ... + k5 θ⁵.
        let k = &self.k;
        theta * (k[0] + theta * (k[1] + theta * (k[2] + theta * (k[3] + theta * k[4]))))
    }

    pub fn radius_derivative(&self, theta: f64) -> f64 {
        let k = &self.k;
        k[0] + theta * (2.0 * k[1] + theta * (3.0 * k[2] + theta * (4.0 * k[3] + theta * 5.0 * k[4])))
    }

    pub fn max_radius(&self) -> f64 {
        self.radius(self.max_fov_half_angle)
    }

    /// Solves `radius(θ) = r` on `[0, max_fov_half_angle]`.
    pub fn incidence_angle(&self, r: f64) -> Result<f64> {
        let max_r = self.max_radius();
        if !r.is_finite() || r < 0.0 {
            return Err(Error::InvalidInput(format!("pixel radius {r}")));
        }
        if r > max_r {
            return Err(Error::OutOfFov {
                radius: r,
                max_radius: max_r,
            });
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, self.max_fov_half_angle);
        let mut theta = if self.k[0] > 0.0 {
            (r / self.k[0]).min(hi)
        } else {
            0.5 * hi
        };
        for _ in 0..FTHETA_INVERSE_MAX_ITERATIONS {
            let f = self.radius(theta) - r;
            if f == 0.0 {
                return Ok(theta);
            }
            if f > 0.0 {
                hi = theta;
            } else {
                lo = theta;
            }
            let df = self.radius_derivative(theta);
            let mut next = theta - f / df;
            if !(df > 0.0) || !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - theta).abs() < FTHETA_INVERSE_TOLERANCE {
                return Ok(next);
            }
            theta = next;
        }
        Err(Error::Numeric(format!(
            "f-theta inverse did not converge for radius {r}"
        )))
    }

    /// Full horizontal field of view in radians, each side capped at the
    /// model's maximum half angle.
    pub fn horizontal_fov(&self) -> f64 {
        let side = |r: f64| match self.incidence_angle(r) {
            Ok(t) => t,
            Err(_) => self.max_fov_half_angle,
        };
        side(self.cx) + side(self.width as f64 - self.cx)
    }
}

fn check_principal_point(cx: f64, cy: f64, width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Invariant("image dimensions must be positive".into()));
    }
    if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
        return Err(Error::Invariant(format!(
            "principal point ({cx}, {cy}) outside {width}x{height} image"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Intrinsics {
    Pinhole(PinholeIntrinsics),
    #[serde(rename = "ftheta")]
    FTheta(FThetaIntrinsics),
}

impl Intrinsics {
    pub fn size(&self) -> (u32, u32) {
        match self {
            Intrinsics::Pinhole(p) => (p.width, p.height),
            Intrinsics::FTheta(f) => (f.width, f.height),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Intrinsics::Pinhole(p) => p.validate(),
            Intrinsics::FTheta(f) => f.validate(),
        }
    }

    pub fn horizontal_fov(&self) -> f64 {
        match self {
            Intrinsics::Pinhole(p) => p.horizontal_fov(),
            Intrinsics::FTheta(f) => f.horizontal_fov(),
        }
    }
}

/// Image coordinates of a projected point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Camera-frame z.
    pub depth: f64,
    /// Euclidean distance from the camera center.
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub name: String,
    pub intrinsics: Intrinsics,
    /// Maps ego-frame points into the camera frame.
    pub camera_from_ego: RigidTransform,
}

const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

impl CameraModel {
    pub fn new(name: impl Into<String>, intrinsics: Intrinsics, camera_from_ego: RigidTransform) -> Result<Self> {
        let cam = Self {
            name: name.into(),
            intrinsics,
            camera_from_ego,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Invariant("camera name must not be empty".into()));
        }
        self.intrinsics.validate()?;
        if !self.camera_from_ego.is_finite() {
            return Err(Error::Invariant(format!("camera {}: non-finite extrinsics", self.name)));
        }
        let q = self.camera_from_ego.rotation;
        if (q.norm() - 1.0).abs() > ORTHONORMAL_TOLERANCE {
            return Err(Error::Invariant(format!(
                "camera {}: extrinsic rotation not orthonormal",
                self.name
            )));
        }
        Ok(())
    }

    pub fn size(&self) -> (u32, u32) {
        self.intrinsics.size()
    }

    /// World point to camera frame for an ego at `ego_pose`.
    pub fn world_to_camera(&self, p_world: Vec3, ego_pose: &Pose) -> Vec3 {
        self.camera_from_world(ego_pose).apply(p_world)
    }

    pub fn camera_from_world(&self, ego_pose: &Pose) -> RigidTransform {
        self.camera_from_ego.compose(&ego_pose.transform().inverse())
    }

    /// Projects a world point. `Ok(None)` marks points behind a pinhole
    /// camera or outside the f-theta field of view; in-front points that
    /// land off the image still return coordinates.
    pub fn project(&self, p_world: Vec3, ego_pose: &Pose) -> Result<Option<Projection>> {
        if !p_world.is_finite() || !ego_pose.translation.is_finite() {
            return Err(Error::InvalidInput("non-finite point or pose".into()));
        }
        Ok(self.project_camera_frame(self.world_to_camera(p_world, ego_pose)))
    }

    /// Projects a point already expressed in the camera frame.
    pub fn project_camera_frame(&self, p: Vec3) -> Option<Projection> {
        match &self.intrinsics {
            Intrinsics::Pinhole(k) => project_pinhole(k, p),
            Intrinsics::FTheta(k) => project_ftheta(k, p),
        }
    }

    /// Camera-frame point for a pixel. `depth_or_range` is the camera z for
    /// pinhole models and the ray length for f-theta models.
    pub fn unproject(&self, u: f64, v: f64, depth_or_range: f64) -> Result<Vec3> {
        let (w, h) = self.size();
        if !(u.is_finite() && v.is_finite() && depth_or_range.is_finite()) {
            return Err(Error::InvalidInput("non-finite pixel or depth".into()));
        }
        if u < 0.0 || v < 0.0 || u > w as f64 || v > h as f64 {
            return Err(Error::InvalidInput(format!(
                "pixel ({u}, {v}) outside {w}x{h} image"
            )));
        }
        if depth_or_range <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "depth must be positive, got {depth_or_range}"
            )));
        }
        match &self.intrinsics {
            Intrinsics::Pinhole(k) => Ok(Vec3::new(
                (u - k.cx) / k.fx * depth_or_range,
                (v - k.cy) / k.fy * depth_or_range,
                depth_or_range,
            )),
            Intrinsics::FTheta(k) => {
                Ok(ftheta_ray(k, u, v)?.scale(depth_or_range))
            }
        }
    }

    /// Unit ray through a pixel, camera frame.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Result<Vec3> {
        match &self.intrinsics {
            Intrinsics::Pinhole(k) => {
                let d = Vec3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
                Ok(d.scale(1.0 / d.norm()))
            }
            Intrinsics::FTheta(k) => ftheta_ray(k, u, v),
        }
    }
}

fn ftheta_ray(k: &FThetaIntrinsics, u: f64, v: f64) -> Result<Vec3> {
    let (dx, dy) = (u - k.cx, v - k.cy);
    let r = dx.hypot(dy);
    let theta = k.incidence_angle(r)?;
    if r == 0.0 {
        return Ok(Vec3::new(0.0, 0.0, 1.0));
    }
    let (s, c) = theta.sin_cos();
    Ok(Vec3::new(s * dx / r, s * dy / r, c))
}

fn project_pinhole(k: &PinholeIntrinsics, p: Vec3) -> Option<Projection> {
    if p.z <= 0.0 {
        return None;
    }
    Some(Projection {
        u: k.fx * p.x / p.z + k.cx,
        v: k.fy * p.y / p.z + k.cy,
        depth: p.z,
        range: p.norm(),
    })
}

fn project_ftheta(k: &FThetaIntrinsics, p: Vec3) -> Option<Projection> {
    let rho = p.x.hypot(p.y);
    let theta = rho.atan2(p.z);
    if theta > k.max_fov_half_angle || (rho == 0.0 && p.z <= 0.0) {
        return None;
    }
    let r = k.radius(theta);
    let (u, v) = if rho == 0.0 {
        (k.cx, k.cy)
    } else {
        (k.cx + r * p.x / rho, k.cy + r * p.y / rho)
    };
    Some(Projection {
        u,
        v,
        depth: p.z,
        range: p.norm(),
    })
}
