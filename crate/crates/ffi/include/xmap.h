#ifndef XMAP_H
#define XMAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum XmapStatus {
  XMAP_STATUS_OK = 0,
  XMAP_STATUS_NULL_POINTER = 1,
  XMAP_STATUS_INVALID_ARGUMENT = 2,
  XMAP_STATUS_DIMENSION_MISMATCH = 3,
  XMAP_STATUS_DEGENERATE = 4,
  XMAP_STATUS_OUT_OF_BOUNDS = 5,
  XMAP_STATUS_NON_POSITIVE_DISPARITY = 6,
  XMAP_STATUS_ZERO_SPAN = 7,
  XMAP_STATUS_EMPTY = 8,
  XMAP_STATUS_FORMAT = 9,
  XMAP_STATUS_IO = 10,
  // A Rust panic was caught at the boundary.
  XMAP_STATUS_INTERNAL = 11,
} XmapStatus;

typedef enum XmapDedup {
  XMAP_DEDUP_KEEP_FIRST = 0,
  XMAP_DEDUP_KEEP_ALL = 1,
} XmapDedup;

typedef struct XmapCalibration XmapCalibration;

typedef struct XmapDepthFrame XmapDepthFrame;

typedef struct XmapRectifyMap XmapRectifyMap;

typedef struct XmapXMap XmapXMap;

// Camera or projector intrinsics.
typedef struct XmapIntrinsics {
  double fx;
  double fy;
  double cx;
  double cy;
  uint32_t width;
  uint32_t height;
} XmapIntrinsics;

// One camera event. `polarity` is 1 for positive, 0 for negative.
typedef struct XmapEvent {
  uint64_t t;
  uint16_t x;
  uint16_t y;
  uint8_t polarity;
} XmapEvent;

// A detected frame: events `[begin, end)` of the input array.
typedef struct XmapFrame {
  uint64_t start_t;
  uint64_t end_t;
  size_t begin;
  size_t end;
} XmapFrame;

typedef struct XmapPoint {
  uint16_t x;
  uint16_t y;
  double x_r;
  double y_r;
  double disparity;
  double depth;
  uint64_t t;
} XmapPoint;

typedef struct XmapDiscards {
  size_t undefined_entry;
  size_t nonpositive_disparity;
  size_t out_of_bounds;
  size_t duplicate;
} XmapDiscards;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the last failure on this thread. Valid until the next
// failing call on the same thread; empty if nothing has failed.
const char *xmap_last_error(void);

// Library version, static.
const char *xmap_version(void);

// The built-in simulation rig.
//
// # Safety
// `out` must be valid for writes.
enum XmapStatus xmap_calibration_default(struct XmapCalibration **out);

// `rotation` is row-major 3x3 and, with `translation` (metres), maps the
// camera frame to the projector frame.
//
// # Safety
// All pointers must be valid; `rotation` holds 9 and `translation` 3 values.
enum XmapStatus xmap_calibration_new(const struct XmapIntrinsics *camera,
                                     const struct XmapIntrinsics *projector,
                                     const double *rotation,
                                     const double *translation,
                                     struct XmapCalibration **out);

// # Safety
// `path` must be a NUL-terminated string and `out` valid for writes.
enum XmapStatus xmap_calibration_read(const char *path, struct XmapCalibration **out);

// Rectified grid size shared by both views.
//
// # Safety
// `c` must be a live handle; `width` and `height` valid for writes.
enum XmapStatus xmap_calibration_rectified_size(const struct XmapCalibration *c,
                                                size_t *width,
                                                size_t *height);

// # Safety
// `c` must be null or a handle from this library, not yet freed.
void xmap_calibration_free(struct XmapCalibration *c);

// Camera-pixel to rectified-coordinate map for a calibration.
//
// # Safety
// `c` must be a live handle and `out` valid for writes.
enum XmapStatus xmap_rectify_map_camera(const struct XmapCalibration *c,
                                        struct XmapRectifyMap **out);

// # Safety
// `path` must be a NUL-terminated string and `out` valid for writes.
enum XmapStatus xmap_rectify_map_read(const char *path, struct XmapRectifyMap **out);

// # Safety
// `m` must be null or a handle from this library, not yet freed.
void xmap_rectify_map_free(struct XmapRectifyMap *m);

// Builds an X-map from a projector-space time map (`width * height`
// row-major values, NaN where undefined). `time_columns == 0` uses the
// projector width.
//
// # Safety
// `values` must hold `width * height` floats; `c` must be a live handle and
// `out` valid for writes.
enum XmapStatus xmap_xmap_from_time_map(const float *values,
                                        size_t width,
                                        size_t height,
                                        const struct XmapCalibration *c,
                                        size_t time_columns,
                                        struct XmapXMap **out);

// # Safety
// `path` must be a NUL-terminated string and `out` valid for writes.
enum XmapStatus xmap_xmap_read(const char *path, struct XmapXMap **out);

// Grid size of an X-map: `time_columns` by `rows`.
//
// # Safety
// `m` must be a live handle; the outputs valid for writes.
enum XmapStatus xmap_xmap_dims(const struct XmapXMap *m, size_t *time_columns, size_t *rows);

// # Safety
// `m` must be null or a handle from this library, not yet freed.
void xmap_xmap_free(struct XmapXMap *m);

// Finds frames in a time-sorted event array using positive events only.
// Writes up to `capacity` frames and the total number found to `count`;
// frame ranges index the input array.
//
// # Safety
// `events` must hold `n` events, `frames` room for `capacity` frames, and
// `count` must be valid for writes.
enum XmapStatus xmap_split_frames(const struct XmapEvent *events,
                                  size_t n,
                                  uint64_t max_gap_us,
                                  uint64_t min_span_us,
                                  struct XmapFrame *frames,
                                  size_t capacity,
                                  size_t *count);

// Depth for the events of one frame. Negative events are ignored.
//
// # Safety
// Handles must be live, `events` must hold `n` events, `out` valid for
// writes.
enum XmapStatus xmap_depth_frame(const struct XmapXMap *xmap,
                                 const struct XmapRectifyMap *rect,
                                 const struct XmapCalibration *c,
                                 const struct XmapEvent *events,
                                 size_t n,
                                 uint64_t start_t,
                                 uint64_t end_t,
                                 enum XmapDedup dedup,
                                 struct XmapDepthFrame **out);

// Number of points in a depth frame (0 for null).
//
// # Safety
// `f` must be null or a live handle.
size_t xmap_depth_frame_len(const struct XmapDepthFrame *f);

// Borrowed view of the points, valid until the frame is freed. Null for a
// null or empty frame.
//
// # Safety
// `f` must be null or a live handle.
const struct XmapPoint *xmap_depth_frame_points(const struct XmapDepthFrame *f);

// # Safety
// `f` must be a live handle and `out` valid for writes.
enum XmapStatus xmap_depth_frame_discards(const struct XmapDepthFrame *f, struct XmapDiscards *out);

// # Safety
// `f` must be null or a handle from this library, not yet freed.
void xmap_depth_frame_free(struct XmapDepthFrame *f);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XMAP_H */
