use super::{CameraModel, Intrinsics, PinholeIntrinsics};
use crate::error::{Error, Result};

/// Widest horizontal field of view a rectified pinhole target may have.
pub const MAX_RECTIFIED_HFOV: f64 = 120.0 * std::f64::consts::PI / 180.0;

/// Per-target-pixel source sample locations. Entry `(i, j)` holds the
/// source coordinates for target pixel center `(i, j)` (integer
/// coordinates, as used by remap-style samplers).
#[derive(Debug, Clone, PartialEq)]
pub struct RemapTable {
    pub target: PinholeIntrinsics,
    pub map: Vec<[f64; 2]>,
}

impl RemapTable {
    pub fn get(&self, i: u32, j: u32) -> [f64; 2] {
        self.map[(j * self.target.width + i) as usize]
    }
}

/// Builds the remap table from a `target_w x target_h` pinhole view to
/// `src`. The target focal length gives a horizontal field of view of
/// `min(source hfov, 120°)`; a pinhole source of identical size is reused
/// as is.
pub fn rectify_spec(src: &CameraModel, target_w: u32, target_h: u32) -> Result<RemapTable> {
    src.validate()?;
    if target_w == 0 || target_h == 0 {
        return Err(Error::Config("target dimensions must be positive".into()));
    }
    let target = match &src.intrinsics {
        Intrinsics::Pinhole(p) if p.width == target_w && p.height == target_h => *p,
        other => {
            let hfov = other.horizontal_fov().min(MAX_RECTIFIED_HFOV);
            let f = 0.5 * target_w as f64 / (0.5 * hfov).tan();
            PinholeIntrinsics {
                fx: f,
                fy: f,
                cx: 0.5 * target_w as f64,
                cy: 0.5 * target_h as f64,
                width: target_w,
                height: target_h,
            }
        }
    };
    let (sw, sh) = src.size();
    let mut map = Vec::with_capacity(target_w as usize * target_h as usize);
    let mut uncovered = 0usize;
    for j in 0..target_h {
        for i in 0..target_w {
            let ray = crate::scene::Vec3::new(
                (i as f64 - target.cx) / target.fx,
                (j as f64 - target.cy) / target.fy,
                1.0,
            );
            match src.project_camera_frame(ray) {
                Some(p) if p.u >= 0.0 && p.v >= 0.0 && p.u <= sw as f64 && p.v <= sh as f64 => {
                    map.push([p.u, p.v]);
                }
                Some(p) => {
                    uncovered += 1;
                    map.push([p.u, p.v]);
                }
                None => {
                    uncovered += 1;
                    map.push([f64::NAN, f64::NAN]);
                }
            }
        }
    }
    if uncovered > 0 {
        return Err(Error::Coverage {
            uncovered_fraction: uncovered as f64 / map.len() as f64,
        });
    }
    Ok(RemapTable { target, map })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::FThetaIntrinsics;
    use crate::scene::RigidTransform;

    fn fisheye() -> CameraModel {
        CameraModel::new(
            "fisheye",
            Intrinsics::FTheta(FThetaIntrinsics::equidistant(500.0, 960.0, 540.0, 1920, 1080, 1.2)),
            RigidTransform::IDENTITY,
        )
        .unwrap()
    }

    #[test]
    fn same_size_pinhole_is_identity() {
        let cam = CameraModel::new(
            "p",
            Intrinsics::Pinhole(PinholeIntrinsics {
                fx: 700.0,
                fy: 690.0,
                cx: 470.0,
                cy: 260.0,
                width: 960,
                height: 540,
            }),
            RigidTransform::IDENTITY,
        )
        .unwrap();
        let table = rectify_spec(&cam, 960, 540).unwrap();
        for (j, i) in [(0, 0), (100, 200), (539, 959), (270, 480)] {
            let [u, v] = table.get(i, j);
            assert!((u - i as f64).abs() < 1e-6 && (v - j as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn fisheye_center_maps_to_center() {
        let table = rectify_spec(&fisheye(), 960, 540).unwrap();
        assert_eq!(table.get(480, 270), [960.0, 540.0]);
        // Source hfov is 2.4 rad, so the 120° cap applies.
        let expected_f = 480.0 / (MAX_RECTIFIED_HFOV / 2.0).tan();
        assert!((table.target.fx - expected_f).abs() < 1e-9);
    }

    #[test]
    fn off_center_matches_composition() {
        let src = fisheye();
        let table = rectify_spec(&src, 960, 540).unwrap();
        let target = CameraModel::new("t", Intrinsics::Pinhole(table.target), RigidTransform::IDENTITY).unwrap();
        for (i, j) in [(10u32, 20u32), (900, 500), (123, 456), (959, 0)] {
            let ray = target.unproject(i as f64, j as f64, 1.0).unwrap();
            let p = src.project_camera_frame(ray).unwrap();
            let [u, v] = table.get(i, j);
            assert!((u - p.u).abs() < 1e-9 && (v - p.v).abs() < 1e-9);
        }
    }

    #[test]
    fn narrow_source_reports_coverage() {
        // A tiny fisheye image cannot cover the target corners.
        let src = CameraModel::new(
            "small",
            Intrinsics::FTheta(FThetaIntrinsics::equidistant(100.0, 160.0, 20.0, 320, 40, 1.5)),
            RigidTransform::IDENTITY,
        )
        .unwrap();
        match rectify_spec(&src, 960, 540) {
            Err(Error::Coverage { uncovered_fraction }) => {
                assert!(uncovered_fraction > 0.0 && uncovered_fraction <= 1.0)
            }
            other => panic!("expected coverage error, got {other:?}"),
        }
    }
}
