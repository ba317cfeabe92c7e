use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scene::Vec3;

/// Range `r`, azimuth `phi` in `[-π, π)`, elevation `theta` in `[-π/2, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    pub r: f64,
    pub phi: f64,
    pub theta: f64,
}

/// `r = √(x²+y²+z²)`, `φ = atan2(y, x)`, `θ = asin(z / r)`. The origin maps
/// to `θ = 0`; the poles use `φ = 0`.
pub fn cart_to_spherical(p: Vec3) -> Result<SphericalPoint> {
    if !p.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite point {p:?}")));
    }
    Ok(cart_to_spherical_unchecked(p))
}

pub(crate) fn cart_to_spherical_unchecked(p: Vec3) -> SphericalPoint {
    let r = p.norm();
    let phi = if p.x == 0.0 && p.y == 0.0 {
        0.0
    } else {
        let a = p.y.atan2(p.x);
        // atan2 returns π for the negative x axis; fold it into [-π, π).
        if a >= PI {
            -PI
        } else {
            a
        }
    };
    let theta = if r > 0.0 {
        (p.z / r).clamp(-1.0, 1.0).asin()
    } else {
        0.0
    };
    SphericalPoint { r, phi, theta }
}

pub fn spherical_to_cart(s: SphericalPoint) -> Result<Vec3> {
    if !(s.r.is_finite() && s.phi.is_finite() && s.theta.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite spherical point {s:?}")));
    }
    Ok(spherical_to_cart_unchecked(s))
}

pub(crate) fn spherical_to_cart_unchecked(s: SphericalPoint) -> Vec3 {
    let (st, ct) = s.theta.sin_cos();
    let (sp, cp) = s.phi.sin_cos();
    Vec3::new(s.r * ct * cp, s.r * ct * sp, s.r * st)
}
