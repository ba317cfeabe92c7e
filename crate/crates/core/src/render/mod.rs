//! Per-frame condition videos: HDMap entities and object boxes, or LiDAR
//! depth, rendered from the ego camera.

mod chunk;
pub mod output;
mod palette;
pub mod raster;

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use chunk::{chunk_count, chunk_video, ChunkName, VideoChunk, Weather, CHUNK_FRAMES};
pub use palette::{depth_color, Palette};
use raster::{Canvas, Rgb};

use crate::camera::{CameraModel, Intrinsics};
use crate::error::{Error, Result};
use crate::lidar::Sweep;
use crate::scene::{Cuboid, Geometry, MapClass, Pose, RigidTransform, SceneClip, Vec3, CUBOID_FACES};

pub const DEFAULT_WIDTH: u32 = 1280;
pub const DEFAULT_HEIGHT: u32 = 704;
pub const DEFAULT_FPS: f64 = 30.0;

/// Fill and stroke order for map classes; later classes paint over earlier.
pub const POLYGON_ORDER: [MapClass; 2] = [MapClass::Crosswalk, MapClass::RoadMarking];
pub const POLYLINE_ORDER: [MapClass; 5] = [
    MapClass::Lane,
    MapClass::RoadBoundary,
    MapClass::LaneLine,
    MapClass::WaitLine,
    MapClass::Pole,
];

/// Segments are split into this many pieces before f-theta projection.
const FTHETA_SUBDIVISIONS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DrawFlags {
    pub map: bool,
    pub cuboids: bool,
    pub lidar_depth: bool,
}

impl Default for DrawFlags {
    fn default() -> Self {
        Self {
            map: true,
            cuboids: true,
            lidar_depth: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderSpec {
    pub camera: String,
    pub width: u32,
    pub height: u32,
    pub frame_count: u32,
    pub fps: f64,
    pub start_frame: u32,
    pub palette: Palette,
    pub line_width: f64,
    pub draw: DrawFlags,
    /// Camera-frame distance below which geometry is clipped, meters.
    pub near_plane: f64,
    /// Depth mapped to the far end of the depth colormap, meters.
    pub depth_max: f64,
    /// Worker threads; 0 uses all available cores.
    pub workers: usize,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            camera: "front".into(),
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            frame_count: CHUNK_FRAMES as u32,
            fps: DEFAULT_FPS,
            start_frame: 0,
            palette: Palette::default(),
            line_width: 4.0,
            draw: DrawFlags::default(),
            near_plane: 0.1,
            depth_max: 80.0,
            workers: 0,
        }
    }
}

impl RenderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frame_count == 0 {
            return Err(Error::Config("frame_count must be at least 1".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("render size must be non-zero".into()));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.line_width.is_finite() && self.line_width > 0.0) {
            return Err(Error::Config("line_width must be positive".into()));
        }
        if !(self.near_plane.is_finite() && self.near_plane > 0.0) {
            return Err(Error::Config("near_plane must be positive".into()));
        }
        if !(self.depth_max.is_finite() && self.depth_max > 0.0) {
            return Err(Error::Config("depth_max must be positive".into()));
        }
        self.palette.validate()
    }

    /// Clip-clock time of output frame `i`.
    pub fn frame_time(&self, clip_start: f64, i: u32) -> f64 {
        clip_start + (self.start_frame as f64 + i as f64) / self.fps
    }
}

/// One rendered frame; `rgb` is row-major interleaved RGB8.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionFrame {
    /// Absolute frame index, `start_frame + i`.
    pub index: u32,
    pub timestamp: f64,
    pub ego_pose: Pose,
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<u8>,
}

/// Camera plus the scale from calibrated image size to output size.
struct View<'a> {
    cam: &'a CameraModel,
    cam_from_world: RigidTransform,
    sx: f64,
    sy: f64,
    near: f64,
}

impl View<'_> {
    fn is_pinhole(&self) -> bool {
        matches!(self.cam.intrinsics, Intrinsics::Pinhole(_))
    }

    fn to_px(&self, p_cam: Vec3) -> Option<(f64, f64)> {
        if p_cam.norm() < self.near {
            return None;
        }
        self.cam
            .project_camera_frame(p_cam)
            .map(|q| (q.u * self.sx, q.v * self.sy))
    }
}

fn clip_segment_near(a: Vec3, b: Vec3, near: f64) -> Option<(Vec3, Vec3)> {
    match (a.z >= near, b.z >= near) {
        (true, true) => Some((a, b)),
        (false, false) => None,
        _ => {
            let s = (near - a.z) / (b.z - a.z);
            let m = a.lerp(b, s);
            let m = Vec3::new(m.x, m.y, near);
            if a.z >= near {
                Some((a, m))
            } else {
                Some((m, b))
            }
        }
    }
}

/// Sutherland-Hodgman against `z >= near`.
fn clip_polygon_near(poly: &[Vec3], near: f64) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ain, bin) = (a.z >= near, b.z >= near);
        if ain {
            out.push(a);
        }
        if ain != bin {
            let m = a.lerp(b, (near - a.z) / (b.z - a.z));
            out.push(Vec3::new(m.x, m.y, near));
        }
    }
    out
}

fn draw_polyline(canvas: &mut Canvas, view: &View, pts: &[Vec3], width: f64, color: Rgb) {
    for w in pts.windows(2) {
        if view.is_pinhole() {
            let Some((a, b)) = clip_segment_near(w[0], w[1], view.near) else {
                continue;
            };
            if let (Some(pa), Some(pb)) = (view.to_px(a), view.to_px(b)) {
                canvas.draw_segment(pa, pb, width, color);
            }
        } else {
            let mut prev = view.to_px(w[0]);
            for k in 1..=FTHETA_SUBDIVISIONS {
                let p = view.to_px(w[0].lerp(w[1], k as f64 / FTHETA_SUBDIVISIONS as f64));
                if let (Some(pa), Some(pb)) = (prev, p) {
                    canvas.draw_segment(pa, pb, width, color);
                }
                prev = p;
            }
        }
    }
}

fn fill_face(canvas: &mut Canvas, view: &View, ring: &[Vec3], color: Rgb) {
    let px: Vec<(f64, f64)> = if view.is_pinhole() {
        let clipped = clip_polygon_near(ring, view.near);
        match clipped.iter().map(|p| view.to_px(*p)).collect::<Option<Vec<_>>>() {
            Some(v) => v,
            None => return,
        }
    } else {
        let mut dense = Vec::with_capacity(ring.len() * FTHETA_SUBDIVISIONS);
        for i in 0..ring.len() {
            let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
            for k in 0..FTHETA_SUBDIVISIONS {
                dense.push(a.lerp(b, k as f64 / FTHETA_SUBDIVISIONS as f64));
            }
        }
        dense.into_iter().filter_map(|p| view.to_px(p)).collect()
    };
    canvas.fill_polygon(&px, color);
}

struct Scene<'a> {
    clip: &'a SceneClip,
    cam: &'a CameraModel,
    spec: &'a RenderSpec,
    t0: f64,
    t1: f64,
}

impl<'a> Scene<'a> {
    fn new(clip: &'a SceneClip, spec: &'a RenderSpec) -> Result<Self> {
        spec.validate()?;
        let cam = clip
            .camera(&spec.camera)
            .ok_or_else(|| Error::Config(format!("camera {:?} not in rig", spec.camera)))?;
        let (t0, t1) = clip.time_span();
        let last = spec.frame_time(t0, spec.frame_count - 1);
        if last > t1 + 1e-9 * t1.abs().max(1.0) {
            return Err(Error::OutOfRange {
                t: last,
                start: t0,
                end: t1,
            });
        }
        Ok(Self {
            clip,
            cam,
            spec,
            t0,
            t1,
        })
    }

    fn frame_pose(&self, i: u32) -> Result<(f64, Pose)> {
        let t = self.spec.frame_time(self.t0, i).min(self.t1);
        Ok((t, self.clip.ego_pose_at(t)?))
    }

    fn view(&self, pose: &Pose) -> View<'a> {
        let (cw, ch) = self.cam.size();
        View {
            cam: self.cam,
            cam_from_world: self.cam.camera_from_world(pose),
            sx: self.spec.width as f64 / cw as f64,
            sy: self.spec.height as f64 / ch as f64,
            near: self.spec.near_plane,
        }
    }

    fn frame(&self, i: u32, canvas: Canvas, pose: Pose, t: f64) -> ConditionFrame {
        ConditionFrame {
            index: self.spec.start_frame + i,
            timestamp: t,
            ego_pose: pose,
            width: canvas.width,
            height: canvas.height,
            rgb: canvas.data,
        }
    }
}

fn render_map_frame(scene: &Scene, i: u32) -> Result<ConditionFrame> {
    let spec = scene.spec;
    let (t, pose) = scene.frame_pose(i)?;
    let view = scene.view(&pose);
    let mut canvas = Canvas::new(spec.width, spec.height, spec.palette.background);
    let to_cam = |p: &Vec3| view.cam_from_world.apply(*p);
    let entities = scene.clip.map_entities();

    if spec.draw.map {
        for class in POLYGON_ORDER {
            let color = spec.palette.map_color(class);
            for e in entities.iter().filter(|e| e.class() == class) {
                if let Geometry::Polygon { vertices } = e.geometry() {
                    let ring: Vec<Vec3> = vertices.iter().map(to_cam).collect();
                    fill_face(&mut canvas, &view, &ring, color);
                }
            }
        }
        for class in POLYLINE_ORDER {
            let color = spec.palette.map_color(class);
            for e in entities.iter().filter(|e| e.class() == class) {
                if let Geometry::Polyline { vertices } = e.geometry() {
                    let pts: Vec<Vec3> = vertices.iter().map(to_cam).collect();
                    draw_polyline(&mut canvas, &view, &pts, spec.line_width, color);
                }
            }
        }
    }

    let mut boxes: Vec<(Cuboid, Rgb)> = Vec::new();
    if spec.draw.map {
        for e in entities {
            if let Geometry::Cuboid(c) = e.geometry() {
                boxes.push((*c, spec.palette.map_color(e.class())));
            }
        }
    }
    if spec.draw.cuboids {
        for track in scene.clip.object_tracks() {
            if let Some(c) = track.state_at(t) {
                boxes.push((c, spec.palette.object_color(track.category())));
            }
        }
    }
    // Painter's order: farthest box center first; stable for equal distances.
    let mut keyed: Vec<(f64, [Vec3; 8], Rgb)> = boxes
        .iter()
        .map(|(c, col)| {
            let d = view.cam_from_world.apply(c.center.translation).norm();
            (d, c.corners().map(|p| to_cam(&p)), *col)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
    for (_, corners, color) in &keyed {
        for face in CUBOID_FACES {
            let ring = face.map(|k| corners[k]);
            fill_face(&mut canvas, &view, &ring, *color);
        }
    }
    Ok(scene.frame(i, canvas, pose, t))
}

fn nearest_sweep(sweeps: &[Sweep], t: f64) -> Option<&Sweep> {
    // Earlier sweep wins ties.
    sweeps.iter().min_by(|a, b| {
        let da = (a.sweep_start_time - t).abs();
        let db = (b.sweep_start_time - t).abs();
        da.total_cmp(&db)
    })
}

fn render_depth_frame(scene: &Scene, sweeps: &[Sweep], i: u32) -> Result<ConditionFrame> {
    let spec = scene.spec;
    let (t, pose) = scene.frame_pose(i)?;
    let view = scene.view(&pose);
    let (w, h) = (spec.width, spec.height);
    let mut canvas = Canvas::new(w, h, [0, 0, 0]);
    let mut best = vec![f64::INFINITY; w as usize * h as usize];
    if let Some(sweep) = nearest_sweep(sweeps, t) {
        let track = scene.clip.ego_pose_track();
        for p in sweep.world_points(track)? {
            let pc = view.cam_from_world.apply(p);
            if pc.norm() < view.near {
                continue;
            }
            let Some(q) = view.cam.project_camera_frame(pc) else {
                continue;
            };
            let (u, v) = (q.u * view.sx, q.v * view.sy);
            if !(u >= 0.0 && v >= 0.0 && u < w as f64 && v < h as f64) {
                continue;
            }
            let (x, y) = (u as u32, v as u32);
            let k = y as usize * w as usize + x as usize;
            if q.range < best[k] {
                best[k] = q.range;
                canvas.put(x, y, depth_color(q.range / spec.depth_max));
            }
        }
    }
    Ok(scene.frame(i, canvas, pose, t))
}

fn run_frames<F>(spec: &RenderSpec, f: F) -> Result<Vec<ConditionFrame>>
where
    F: Fn(u32) -> Result<ConditionFrame> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start render workers: {e}")))?;
    pool.install(|| (0..spec.frame_count).into_par_iter().map(&f).collect())
}

/// Renders map polygons, then map polylines, then all cuboids (map boxes
/// and interpolated object tracks) far-to-near.
pub fn render_hdmap_video(clip: &SceneClip, spec: &RenderSpec) -> Result<Vec<ConditionFrame>> {
    let scene = Scene::new(clip, spec)?;
    run_frames(spec, |i| render_map_frame(&scene, i))
}

/// Projects the sweep nearest in time to each frame; the nearest return
/// wins each pixel and pixels without returns stay black.
pub fn render_lidar_depth_video(clip: &SceneClip, spec: &RenderSpec) -> Result<Vec<ConditionFrame>> {
    let sweeps = clip
        .lidar_sweeps()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Precondition(format!("clip {} has no lidar sweeps", clip.clip_id())))?;
    let scene = Scene::new(clip, spec)?;
    run_frames(spec, |i| render_depth_frame(&scene, sweeps, i))
}

/// Renders whichever condition the draw flags select; LiDAR depth takes
/// precedence when set.
pub fn render_condition_video(clip: &SceneClip, spec: &RenderSpec) -> Result<Vec<ConditionFrame>> {
    if spec.draw.lidar_depth {
        render_lidar_depth_video(clip, spec)
    } else {
        render_hdmap_video(clip, spec)
    }
}
