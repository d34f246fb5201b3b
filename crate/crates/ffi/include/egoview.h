/* Generated by cbindgen from crates/ffi. Do not edit. */

#ifndef EGOVIEW_H
#define EGOVIEW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EgoviewStatus {
  EGOVIEW_STATUS_OK = 0,
  EGOVIEW_STATUS_NULL_POINTER = 1,
  EGOVIEW_STATUS_INVALID_ARGUMENT = 2,
  EGOVIEW_STATUS_DIMENSION_MISMATCH = 3,
  EGOVIEW_STATUS_EMPTY_REGION = 4,
  EGOVIEW_STATUS_INVALID_SAMPLE = 5,
  EGOVIEW_STATUS_DEGENERATE_CONFIGURATION = 6,
  EGOVIEW_STATUS_NO_VALID_DEPTH = 7,
  EGOVIEW_STATUS_PARSE = 8,
  EGOVIEW_STATUS_IO = 9,
  EGOVIEW_STATUS_INTERNAL = 10,
} EgoviewStatus;

typedef struct EgoviewDepthMap EgoviewDepthMap;

typedef struct EgoviewImage EgoviewImage;

typedef struct EgoviewSparseMap EgoviewSparseMap;

// `x -> scale * R x + t`, rotation row-major.
typedef struct EgoviewTransform {
  double scale;
  double rotation[9];
  double translation[3];
} EgoviewTransform;

// Pinhole intrinsics in pixels; principal point in pixel-center coordinates.
typedef struct EgoviewIntrinsics {
  double fx;
  double fy;
  double cx;
  double cy;
  size_t width;
  size_t height;
} EgoviewIntrinsics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the calling thread's most recent failure ("" if none).
const char *egoview_last_error(void);

// Library version as a static NUL-terminated string.
const char *egoview_version(void);

// Creates an image from `width * height * 3` interleaved RGB values in `[0, 1]`.
//
// # Safety
// `rgb` must point to `width * height * 3` readable doubles.
enum EgoviewStatus egoview_image_new(size_t width,
                                     size_t height,
                                     const double *rgb,
                                     struct EgoviewImage **out);

// # Safety
// `path` must be a NUL-terminated string; `out` a writable handle slot.
enum EgoviewStatus egoview_image_load_png(const char *path, struct EgoviewImage **out);

// # Safety
// `image` must be a live handle; `path` a NUL-terminated string.
enum EgoviewStatus egoview_image_save_png(const struct EgoviewImage *image, const char *path);

// Writes width and height of `image`.
//
// # Safety
// `image` must be a live handle; the out-pointers writable.
enum EgoviewStatus egoview_image_dims(const struct EgoviewImage *image,
                                      size_t *width,
                                      size_t *height);

// Copies interleaved RGB into `out`, which must hold `len >= width * height * 3` doubles.
//
// # Safety
// `image` must be a live handle; `out` must point to `len` writable doubles.
enum EgoviewStatus egoview_image_copy_rgb(const struct EgoviewImage *image,
                                          double *out,
                                          size_t len);

// # Safety
// `image` must be NULL or a handle not yet freed.
void egoview_image_free(struct EgoviewImage *image);

// Creates a depth map from `width * height` row-major values.
//
// # Safety
// `values` must point to `width * height` readable doubles.
enum EgoviewStatus egoview_depth_map_new(size_t width,
                                         size_t height,
                                         const double *values,
                                         struct EgoviewDepthMap **out);

// # Safety
// `path` must be a NUL-terminated string; `out` a writable handle slot.
enum EgoviewStatus egoview_depth_map_load_pfm(const char *path, struct EgoviewDepthMap **out);

// # Safety
// `depth` must be a live handle; `path` a NUL-terminated string.
enum EgoviewStatus egoview_depth_map_save_pfm(const struct EgoviewDepthMap *depth,
                                              const char *path);

// # Safety
// `depth` must be a live handle; the out-pointers writable.
enum EgoviewStatus egoview_depth_map_dims(const struct EgoviewDepthMap *depth,
                                          size_t *width,
                                          size_t *height);

// # Safety
// `depth` must be a live handle; `out` must point to `len` writable doubles.
enum EgoviewStatus egoview_depth_map_copy_values(const struct EgoviewDepthMap *depth,
                                                 double *out,
                                                 size_t len);

// # Safety
// `depth` must be NULL or a handle not yet freed.
void egoview_depth_map_free(struct EgoviewDepthMap *depth);

// Median of `hand / (est + delta)` over pixels where `hand_depth` is valid.
//
// # Safety
// Handles must be live; `out_scale` writable.
enum EgoviewStatus egoview_compute_scale(const struct EgoviewDepthMap *hand_depth,
                                         const struct EgoviewDepthMap *est_depth,
                                         double delta,
                                         double *out_scale);

// Least-squares similarity transform taking `source` onto `target`
// (`n` points each, `n * 3` doubles).
//
// # Safety
// `source` and `target` must point to `n * 3` readable doubles.
enum EgoviewStatus egoview_umeyama(const double *source,
                                   const double *target,
                                   size_t n,
                                   struct EgoviewTransform *out);

// Builds the sparse egocentric map. `hand_depth` may be NULL, in which case
// `depth` is taken as metric.
//
// # Safety
// Handles must be live; keypoint arrays must hold `n_keypoints * 3` doubles.
enum EgoviewStatus egoview_build_sparse_map(const struct EgoviewImage *image,
                                            const struct EgoviewDepthMap *depth,
                                            const struct EgoviewDepthMap *hand_depth,
                                            const struct EgoviewIntrinsics *exo_intrinsics,
                                            const double *exo_keypoints,
                                            const double *ego_keypoints,
                                            size_t n_keypoints,
                                            const struct EgoviewIntrinsics *ego_intrinsics,
                                            double delta,
                                            size_t splat_radius,
                                            struct EgoviewSparseMap **out);

// Fraction of pixels covered by at least one projected point.
//
// # Safety
// `map` must be a live handle; `out` writable.
enum EgoviewStatus egoview_sparse_map_valid_fraction(const struct EgoviewSparseMap *map,
                                                     double *out);

// Estimated exocentric-to-egocentric transform and depth scale used for the map.
//
// # Safety
// `map` must be a live handle; the out-pointers writable.
enum EgoviewStatus egoview_sparse_map_calibration(const struct EgoviewSparseMap *map,
                                                  struct EgoviewTransform *transform,
                                                  double *scale);

// Copies the map's RGB image into a new image handle.
//
// # Safety
// `map` must be a live handle; `out` a writable handle slot.
enum EgoviewStatus egoview_sparse_map_image(const struct EgoviewSparseMap *map,
                                            struct EgoviewImage **out);

// Copies the validity mask as bytes (1 = valid) into `out` of `len` bytes.
//
// # Safety
// `map` must be a live handle; `out` must point to `len` writable bytes.
enum EgoviewStatus egoview_sparse_map_copy_mask(const struct EgoviewSparseMap *map,
                                                uint8_t *out,
                                                size_t len);

// Writes `<dir>/<stem>_rgb.png`, `<stem>_mask.png` and `<stem>_depth.pfm`.
//
// # Safety
// `map` must be a live handle; `dir` and `stem` NUL-terminated strings.
enum EgoviewStatus egoview_sparse_map_save(const struct EgoviewSparseMap *map,
                                           const char *dir,
                                           const char *stem);

// # Safety
// `map` must be NULL or a handle not yet freed.
void egoview_sparse_map_free(struct EgoviewSparseMap *map);

// PSNR in dB for a peak value of 1; +infinity for identical images.
//
// # Safety
// Handles must be live; `out` writable.
enum EgoviewStatus egoview_psnr(const struct EgoviewImage *a,
                                const struct EgoviewImage *b,
                                double *out);

// Mean SSIM over channels (11x11 Gaussian window, sigma 1.5).
//
// # Safety
// Handles must be live; `out` writable.
enum EgoviewStatus egoview_ssim(const struct EgoviewImage *a,
                                const struct EgoviewImage *b,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EGOVIEW_H */
