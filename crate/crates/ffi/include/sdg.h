/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SDG_H
#define SDG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SdgStatus {
  SDG_STATUS_OK = 0,
  SDG_STATUS_NULL_POINTER = 1,
  SDG_STATUS_INVALID_ARGUMENT = 2,
  SDG_STATUS_PARSE = 3,
  SDG_STATUS_INVARIANT = 4,
  SDG_STATUS_OUT_OF_RANGE = 5,
  SDG_STATUS_BUFFER_TOO_SMALL = 6,
  SDG_STATUS_IO = 7,
  SDG_STATUS_INTERNAL = 99,
} SdgStatus;

typedef enum SdgWeather {
  SDG_WEATHER_GOLDEN_HOUR = 0,
  SDG_WEATHER_MORNING = 1,
  SDG_WEATHER_NIGHT = 2,
  SDG_WEATHER_RAINY = 3,
  SDG_WEATHER_SNOWY = 4,
  SDG_WEATHER_SUNNY = 5,
  SDG_WEATHER_FOGGY = 6,
} SdgWeather;

/**
 * Pinhole or f-theta camera.
 */
typedef struct SdgCamera SdgCamera;

/**
 * Range map normalized to [-1, 1] with rows repeated.
 */
typedef struct SdgNormalizedMap SdgNormalizedMap;

/**
 * Raw range map (`rows x cols`, row-major).
 */
typedef struct SdgRangeMap SdgRangeMap;

/**
 * Spinning LiDAR sensor model.
 */
typedef struct SdgSensor SdgSensor;

typedef struct SdgEncodeStats {
  size_t encoded;
  size_t dropped_out_of_range;
  size_t dropped_non_finite;
  size_t collisions;
} SdgEncodeStats;

typedef struct SdgProjection {
  double u;
  double v;
  double depth;
  double range;
  /**
   * 0 when the point is behind a pinhole camera or outside the f-theta
   * field of view; the other fields are then zero.
   */
  int32_t visible;
} SdgProjection;

typedef struct SdgSpherical {
  double r;
  double phi;
  double theta;
} SdgSpherical;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *sdg_last_error_message(void);

/**
 * Static name of a status code.
 */
const char *sdg_status_name(enum SdgStatus status);

/**
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SdgStatus sdg_sensor_from_json(const char *json, struct SdgSensor **out);

/**
 * # Safety
 * `sensor` must come from [`sdg_sensor_from_json`]; `rows`/`cols` valid.
 */
enum SdgStatus sdg_sensor_dims(const struct SdgSensor *sensor, size_t *rows, size_t *cols);

/**
 * # Safety
 * `sensor` must come from [`sdg_sensor_from_json`] or be null.
 */
void sdg_sensor_free(struct SdgSensor *sensor);

/**
 * Encodes `n` sensor-frame returns (`xyz`, `3n` doubles) into a range map.
 * `times` holds per-return emission times or is null. `stats` may be null.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum SdgStatus sdg_range_map_encode(const struct SdgSensor *sensor,
                                    const double *xyz,
                                    const double *times,
                                    size_t n,
                                    double sweep_start_time,
                                    struct SdgRangeMap **out,
                                    struct SdgEncodeStats *stats);

/**
 * # Safety
 * `map` must come from [`sdg_range_map_encode`].
 */
enum SdgStatus sdg_range_map_dims(const struct SdgRangeMap *map, size_t *rows, size_t *cols);

/**
 * Copies `rows * cols` ranges; invalid cells hold -1.
 *
 * # Safety
 * `out` must hold `len` floats.
 */
enum SdgStatus sdg_range_map_copy_ranges(const struct SdgRangeMap *map, float *out, size_t len);

/**
 * Copies `rows * cols` validity bytes (1 valid, 0 empty).
 *
 * # Safety
 * `out` must hold `len` bytes.
 */
enum SdgStatus sdg_range_map_copy_mask(const struct SdgRangeMap *map, uint8_t *out, size_t len);

/**
 * # Safety
 * `map` must come from [`sdg_range_map_encode`] or be null.
 */
void sdg_range_map_free(struct SdgRangeMap *map);

/**
 * Maps ranges clipped to `[clip_lo, clip_hi]` linearly onto [-1, 1];
 * empty cells get `fill_value`.
 *
 * # Safety
 * `map` must come from [`sdg_range_map_encode`]; `out` valid.
 */
enum SdgStatus sdg_range_map_normalize(const struct SdgRangeMap *map,
                                       double clip_lo,
                                       double clip_hi,
                                       double fill_value,
                                       struct SdgNormalizedMap **out);

/**
 * # Safety
 * `map` must come from [`sdg_range_map_normalize`].
 */
enum SdgStatus sdg_normalized_dims(const struct SdgNormalizedMap *map, size_t *rows, size_t *cols);

/**
 * # Safety
 * `out` must hold `len` floats.
 */
enum SdgStatus sdg_normalized_copy_values(const struct SdgNormalizedMap *map,
                                          float *out,
                                          size_t len);

/**
 * # Safety
 * `map` must come from [`sdg_range_map_normalize`] or be null.
 */
void sdg_normalized_free(struct SdgNormalizedMap *map);

/**
 * # Safety
 * `json` must be a NUL-terminated camera model; `out` valid.
 */
enum SdgStatus sdg_camera_from_json(const char *json, struct SdgCamera **out);

/**
 * Projects a camera-frame point (x right, y down, z forward).
 *
 * # Safety
 * `camera` from [`sdg_camera_from_json`]; `out` valid.
 */
enum SdgStatus sdg_camera_project(const struct SdgCamera *camera,
                                  double x,
                                  double y,
                                  double z,
                                  struct SdgProjection *out);

/**
 * Camera-frame point at pixel `(u, v)`; `depth_or_range` is z for pinhole
 * and distance for f-theta cameras.
 *
 * # Safety
 * `camera` from [`sdg_camera_from_json`]; `xyz` holds 3 doubles.
 */
enum SdgStatus sdg_camera_unproject(const struct SdgCamera *camera,
                                    double u,
                                    double v,
                                    double depth_or_range,
                                    double *xyz);

/**
 * # Safety
 * `camera` must come from [`sdg_camera_from_json`] or be null.
 */
void sdg_camera_free(struct SdgCamera *camera);

/**
 * # Safety
 * `out` must be valid.
 */
enum SdgStatus sdg_cart_to_spherical(double x, double y, double z, struct SdgSpherical *out);

/**
 * Writes `{clip_id}_{chunk_id}_{weather}` into `buf`.
 *
 * # Safety
 * `clip_id` NUL-terminated; `buf` holds `len` bytes; `required` may be null.
 */
enum SdgStatus sdg_chunk_name_format(const char *clip_id,
                                     uint32_t chunk_id,
                                     enum SdgWeather weather,
                                     char *buf,
                                     size_t len,
                                     size_t *required);

/**
 * Splits a chunk name. The clip id goes to `clip_buf`.
 *
 * # Safety
 * `name` NUL-terminated; `clip_buf` holds `clip_len` bytes; the other
 * outputs are valid pointers (`required` may be null).
 */
enum SdgStatus sdg_chunk_name_parse(const char *name,
                                    char *clip_buf,
                                    size_t clip_len,
                                    size_t *required,
                                    uint32_t *chunk_id,
                                    enum SdgWeather *weather);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SDG_H */
