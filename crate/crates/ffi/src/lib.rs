//! C ABI over `sdg-core`.
//!
//! Objects are opaque handles created by `*_from_json` / `*_encode` calls and
//! released with the matching `*_free`. Every fallible call returns an
//! [`SdgStatus`]; on failure the message is available from
//! [`sdg_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use sdg_core::camera::CameraModel;
use sdg_core::lidar::{encode_range_map, normalize_with_fill, NormalizedRangeMap, RangeMap, SensorModel, TimedPoint};
use sdg_core::render::{ChunkName, Weather};
use sdg_core::scene::Vec3;
use sdg_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Invariant = 4,
    OutOfRange = 5,
    BufferTooSmall = 6,
    Io = 7,
    Internal = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdgWeather {
    GoldenHour = 0,
    Morning = 1,
    Night = 2,
    Rainy = 3,
    Snowy = 4,
    Sunny = 5,
    Foggy = 6,
}

impl From<SdgWeather> for Weather {
    fn from(w: SdgWeather) -> Self {
        Weather::ALL[w as usize]
    }
}

impl From<Weather> for SdgWeather {
    fn from(w: Weather) -> Self {
        match w {
            Weather::GoldenHour => SdgWeather::GoldenHour,
            Weather::Morning => SdgWeather::Morning,
            Weather::Night => SdgWeather::Night,
            Weather::Rainy => SdgWeather::Rainy,
            Weather::Snowy => SdgWeather::Snowy,
            Weather::Sunny => SdgWeather::Sunny,
            Weather::Foggy => SdgWeather::Foggy,
        }
    }
}

/// Spinning LiDAR sensor model.
pub struct SdgSensor(Arc<SensorModel>);

/// Raw range map (`rows x cols`, row-major).
pub struct SdgRangeMap(RangeMap);

/// Range map normalized to [-1, 1] with rows repeated.
pub struct SdgNormalizedMap(NormalizedRangeMap);

/// Pinhole or f-theta camera.
pub struct SdgCamera(CameraModel);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SdgEncodeStats {
    pub encoded: usize,
    pub dropped_out_of_range: usize,
    pub dropped_non_finite: usize,
    pub collisions: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SdgProjection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    pub range: f64,
    /// 0 when the point is behind a pinhole camera or outside the f-theta
    /// field of view; the other fields are then zero.
    pub visible: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SdgSpherical {
    pub r: f64,
    pub phi: f64,
    pub theta: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SdgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidInput(_) | Error::Config(_) => SdgStatus::InvalidArgument,
            Error::Parse { .. } | Error::Json(_) => SdgStatus::Parse,
            Error::Invariant(_) | Error::Numeric(_) => SdgStatus::Invariant,
            Error::OutOfRange { .. } | Error::OutOfFov { .. } => SdgStatus::OutOfRange,
            Error::Io { .. } => SdgStatus::Io,
            _ => SdgStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: SdgStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn run(f: impl FnOnce() -> Result<(), Failure>) -> SdgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SdgStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SdgStatus::Internal
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(SdgStatus::NullPointer, format!("{what} is null")))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(SdgStatus::NullPointer, format!("{what} is null")))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(SdgStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(SdgStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies `s` plus a terminating NUL into `buf`. `required` receives the
/// needed size including the NUL.
unsafe fn write_c_string(s: &str, buf: *mut c_char, len: usize, required: *mut usize) -> Result<(), Failure> {
    if let Some(r) = required.as_mut() {
        *r = s.len() + 1;
    }
    if buf.is_null() {
        return fail(SdgStatus::NullPointer, "output buffer is null");
    }
    if len < s.len() + 1 {
        return fail(SdgStatus::BufferTooSmall, format!("need {} bytes, have {len}", s.len() + 1));
    }
    ptr::copy_nonoverlapping(s.as_ptr() as *const c_char, buf, s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

unsafe fn copy_out<T: Copy>(src: impl ExactSizeIterator<Item = T>, out: *mut T, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return fail(SdgStatus::NullPointer, "output buffer is null");
    }
    if len != src.len() {
        return fail(
            SdgStatus::BufferTooSmall,
            format!("buffer holds {len} values, map has {}", src.len()),
        );
    }
    for (i, v) in src.enumerate() {
        *out.add(i) = v;
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sdg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn sdg_status_name(status: SdgStatus) -> *const c_char {
    let s: &'static CStr = match status {
        SdgStatus::Ok => c"ok",
        SdgStatus::NullPointer => c"null_pointer",
        SdgStatus::InvalidArgument => c"invalid_argument",
        SdgStatus::Parse => c"parse",
        SdgStatus::Invariant => c"invariant",
        SdgStatus::OutOfRange => c"out_of_range",
        SdgStatus::BufferTooSmall => c"buffer_too_small",
        SdgStatus::Io => c"io",
        SdgStatus::Internal => c"internal",
    };
    s.as_ptr()
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdg_sensor_from_json(json: *const c_char, out: *mut *mut SdgSensor) -> SdgStatus {
    run(|| {
        let out = as_mut(out, "out")?;
        *out = ptr::null_mut();
        let model = SensorModel::from_json_str(as_str(json, "json")?)?;
        *out = Box::into_raw(Box::new(SdgSensor(Arc::new(model))));
        Ok(())
    })
}

/// # Safety
/// `sensor` must come from [`sdg_sensor_from_json`]; `rows`/`cols` valid.
#[no_mangle]
pub unsafe extern "C" fn sdg_sensor_dims(sensor: *const SdgSensor, rows: *mut usize, cols: *mut usize) -> SdgStatus {
    run(|| {
        let s = &as_ref(sensor, "sensor")?.0;
        *as_mut(rows, "rows")? = s.beam_count();
        *as_mut(cols, "cols")? = s.width();
        Ok(())
    })
}

/// # Safety
/// `sensor` must come from [`sdg_sensor_from_json`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sdg_sensor_free(sensor: *mut SdgSensor) {
    if !sensor.is_null() {
        drop(Box::from_raw(sensor));
    }
}

/// Encodes `n` sensor-frame returns (`xyz`, `3n` doubles) into a range map.
/// `times` holds per-return emission times or is null. `stats` may be null.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn sdg_range_map_encode(
    sensor: *const SdgSensor,
    xyz: *const f64,
    times: *const f64,
    n: usize,
    sweep_start_time: f64,
    out: *mut *mut SdgRangeMap,
    stats: *mut SdgEncodeStats,
) -> SdgStatus {
    run(|| {
        let out = as_mut(out, "out")?;
        *out = ptr::null_mut();
        let sensor = as_ref(sensor, "sensor")?.0.clone();
        if n > 0 && xyz.is_null() {
            return fail(SdgStatus::NullPointer, "xyz is null");
        }
        if !sweep_start_time.is_finite() {
            return fail(SdgStatus::InvalidArgument, "sweep_start_time must be finite");
        }
        let coords = if n == 0 { &[][..] } else { std::slice::from_raw_parts(xyz, 3 * n) };
        let times = if times.is_null() || n == 0 {
            None
        } else {
            Some(std::slice::from_raw_parts(times, n))
        };
        let points: Vec<TimedPoint> = coords
            .chunks_exact(3)
            .enumerate()
            .map(|(i, c)| TimedPoint {
                time: times.map_or(sweep_start_time, |t| t[i]),
                point: Vec3::new(c[0], c[1], c[2]),
                intensity: None,
            })
            .collect();
        let (map, s) = encode_range_map(&points, sensor, sweep_start_time);
        if let Some(st) = stats.as_mut() {
            *st = SdgEncodeStats {
                encoded: s.encoded,
                dropped_out_of_range: s.dropped_out_of_range,
                dropped_non_finite: s.dropped_non_finite,
                collisions: s.collisions,
            };
        }
        *out = Box::into_raw(Box::new(SdgRangeMap(map)));
        Ok(())
    })
}

/// # Safety
/// `map` must come from [`sdg_range_map_encode`].
#[no_mangle]
pub unsafe extern "C" fn sdg_range_map_dims(map: *const SdgRangeMap, rows: *mut usize, cols: *mut usize) -> SdgStatus {
    run(|| {
        let m = &as_ref(map, "map")?.0;
        *as_mut(rows, "rows")? = m.height();
        *as_mut(cols, "cols")? = m.width();
        Ok(())
    })
}

/// Copies `rows * cols` ranges; invalid cells hold -1.
///
/// # Safety
/// `out` must hold `len` floats.
#[no_mangle]
pub unsafe extern "C" fn sdg_range_map_copy_ranges(map: *const SdgRangeMap, out: *mut f32, len: usize) -> SdgStatus {
    run(|| {
        let m = &as_ref(map, "map")?.0;
        copy_out(m.ranges().iter().copied(), out, len)
    })
}

/// Copies `rows * cols` validity bytes (1 valid, 0 empty).
///
/// # Safety
/// `out` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sdg_range_map_copy_mask(map: *const SdgRangeMap, out: *mut u8, len: usize) -> SdgStatus {
    run(|| {
        let m = &as_ref(map, "map")?.0;
        copy_out(m.validity().iter().map(|v| *v as u8), out, len)
    })
}

/// # Safety
/// `map` must come from [`sdg_range_map_encode`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sdg_range_map_free(map: *mut SdgRangeMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Maps ranges clipped to `[clip_lo, clip_hi]` linearly onto [-1, 1];
/// empty cells get `fill_value`.
///
/// # Safety
/// `map` must come from [`sdg_range_map_encode`]; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sdg_range_map_normalize(
    map: *const SdgRangeMap,
    clip_lo: f64,
    clip_hi: f64,
    fill_value: f64,
    out: *mut *mut SdgNormalizedMap,
) -> SdgStatus {
    run(|| {
        let out = as_mut(out, "out")?;
        *out = ptr::null_mut();
        let m = &as_ref(map, "map")?.0;
        let n = normalize_with_fill(m, clip_lo, clip_hi, fill_value)?;
        *out = Box::into_raw(Box::new(SdgNormalizedMap(n)));
        Ok(())
    })
}

/// # Safety
/// `map` must come from [`sdg_range_map_normalize`].
#[no_mangle]
pub unsafe extern "C" fn sdg_normalized_dims(map: *const SdgNormalizedMap, rows: *mut usize, cols: *mut usize) -> SdgStatus {
    run(|| {
        let m = &as_ref(map, "map")?.0;
        *as_mut(rows, "rows")? = m.height;
        *as_mut(cols, "cols")? = m.width;
        Ok(())
    })
}

/// # Safety
/// `out` must hold `len` floats.
#[no_mangle]
pub unsafe extern "C" fn sdg_normalized_copy_values(map: *const SdgNormalizedMap, out: *mut f32, len: usize) -> SdgStatus {
    run(|| {
        let m = &as_ref(map, "map")?.0;
        copy_out(m.values.iter().map(|v| *v as f32), out, len)
    })
}

/// # Safety
/// `map` must come from [`sdg_range_map_normalize`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sdg_normalized_free(map: *mut SdgNormalizedMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// # Safety
/// `json` must be a NUL-terminated camera model; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sdg_camera_from_json(json: *const c_char, out: *mut *mut SdgCamera) -> SdgStatus {
    run(|| {
        let out = as_mut(out, "out")?;
        *out = ptr::null_mut();
        let cam: CameraModel = serde_json::from_str(as_str(json, "json")?).map_err(Error::from)?;
        cam.validate()?;
        *out = Box::into_raw(Box::new(SdgCamera(cam)));
        Ok(())
    })
}

/// Projects a camera-frame point (x right, y down, z forward).
///
/// # Safety
/// `camera` from [`sdg_camera_from_json`]; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sdg_camera_project(
    camera: *const SdgCamera,
    x: f64,
    y: f64,
    z: f64,
    out: *mut SdgProjection,
) -> SdgStatus {
    run(|| {
        let cam = &as_ref(camera, "camera")?.0;
        let out = as_mut(out, "out")?;
        let p = Vec3::new(x, y, z);
        if !p.is_finite() {
            return fail(SdgStatus::InvalidArgument, "point must be finite");
        }
        *out = match cam.project_camera_frame(p) {
            Some(pr) => SdgProjection {
                u: pr.u,
                v: pr.v,
                depth: pr.depth,
                range: pr.range,
                visible: 1,
            },
            None => SdgProjection::default(),
        };
        Ok(())
    })
}

/// Camera-frame point at pixel `(u, v)`; `depth_or_range` is z for pinhole
/// and distance for f-theta cameras.
///
/// # Safety
/// `camera` from [`sdg_camera_from_json`]; `xyz` holds 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn sdg_camera_unproject(
    camera: *const SdgCamera,
    u: f64,
    v: f64,
    depth_or_range: f64,
    xyz: *mut f64,
) -> SdgStatus {
    run(|| {
        let cam = &as_ref(camera, "camera")?.0;
        if xyz.is_null() {
            return fail(SdgStatus::NullPointer, "xyz is null");
        }
        let p = cam.unproject(u, v, depth_or_range)?;
        *xyz = p.x;
        *xyz.add(1) = p.y;
        *xyz.add(2) = p.z;
        Ok(())
    })
}

/// # Safety
/// `camera` must come from [`sdg_camera_from_json`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sdg_camera_free(camera: *mut SdgCamera) {
    if !camera.is_null() {
        drop(Box::from_raw(camera));
    }
}

/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sdg_cart_to_spherical(x: f64, y: f64, z: f64, out: *mut SdgSpherical) -> SdgStatus {
    run(|| {
        let out = as_mut(out, "out")?;
        let s = sdg_core::lidar::cart_to_spherical(Vec3::new(x, y, z))?;
        *out = SdgSpherical {
            r: s.r,
            phi: s.phi,
            theta: s.theta,
        };
        Ok(())
    })
}

/// Writes `{clip_id}_{chunk_id}_{weather}` into `buf`.
///
/// # Safety
/// `clip_id` NUL-terminated; `buf` holds `len` bytes; `required` may be null.
#[no_mangle]
pub unsafe extern "C" fn sdg_chunk_name_format(
    clip_id: *const c_char,
    chunk_id: u32,
    weather: SdgWeather,
    buf: *mut c_char,
    len: usize,
    required: *mut usize,
) -> SdgStatus {
    run(|| {
        let name = ChunkName::new(as_str(clip_id, "clip_id")?, chunk_id, weather.into())?;
        write_c_string(&name.to_string(), buf, len, required)
    })
}

/// Splits a chunk name. The clip id goes to `clip_buf`.
///
/// # Safety
/// `name` NUL-terminated; `clip_buf` holds `clip_len` bytes; the other
/// outputs are valid pointers (`required` may be null).
#[no_mangle]
pub unsafe extern "C" fn sdg_chunk_name_parse(
    name: *const c_char,
    clip_buf: *mut c_char,
    clip_len: usize,
    required: *mut usize,
    chunk_id: *mut u32,
    weather: *mut SdgWeather,
) -> SdgStatus {
    run(|| {
        let parsed: ChunkName = as_str(name, "name")?.parse()?;
        let chunk_out = as_mut(chunk_id, "chunk_id")?;
        let weather_out = as_mut(weather, "weather")?;
        write_c_string(parsed.clip_id(), clip_buf, clip_len, required)?;
        *chunk_out = parsed.chunk_id();
        *weather_out = parsed.weather().into();
        Ok(())
    })
}
