#ifndef FSD_H
#define FSD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FsdStatus {
  FSD_STATUS_OK = 0,
  FSD_STATUS_NULL_POINTER = 1,
  FSD_STATUS_INVALID_ARGUMENT = 2,
  FSD_STATUS_FORMAT = 3,
  FSD_STATUS_IO = 4,
  FSD_STATUS_DEGENERATE = 5,
  FSD_STATUS_CONSISTENCY = 6,
  FSD_STATUS_PANIC = 7,
} FsdStatus;

typedef enum FsdShapeKind {
  /*
   `params = [radius]`
   */
  FSD_SHAPE_KIND_SPHERE = 0,
  /*
   `params = [hx, hy, hz]`
   */
  FSD_SHAPE_KIND_BOX = 1,
  /*
   `params = [major_radius, minor_radius]`
   */
  FSD_SHAPE_KIND_TORUS = 2,
} FsdShapeKind;

typedef enum FsdChamferMode {
  FSD_CHAMFER_MODE_CLAMPED_INLIER = 0,
  FSD_CHAMFER_MODE_HINGE = 1,
} FsdChamferMode;

/*
 Loaded or generated decoder.
 */
typedef struct FsdDecoder FsdDecoder;

/*
 Extracted surfaces, one per object.
 */
typedef struct FsdSurfaces FsdSurfaces;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length without the NUL.

 # Safety
 `buf` must be null or valid for `len` writes.
 */
size_t fsd_last_error_message(char *buf, size_t len);

/*
 Loads binary or JSON weights from `path`.

 # Safety
 `path` must be a NUL-terminated string and `out` valid for one write.
 */
enum FsdStatus fsd_decoder_load(const char *path, struct FsdDecoder **out);

/*
 Seeded random decoder; `shape_calibrated != 0` gives a field with a zero
 level set inside the unit cube.

 # Safety
 `out` must be valid for one write.
 */
enum FsdStatus fsd_decoder_generate(uint64_t seed,
                                    size_t latent_dim,
                                    size_t hidden_dim,
                                    size_t depth,
                                    int32_t shape_calibrated,
                                    struct FsdDecoder **out);

/*
 # Safety
 `decoder` must be null or a live handle.
 */
size_t fsd_decoder_latent_dim(const struct FsdDecoder *decoder);

/*
 # Safety
 `decoder` must be null or a handle not yet freed.
 */
void fsd_decoder_free(struct FsdDecoder *decoder);

/*
 Evaluates the field of one latent at `num_points` xyz triples.

 # Safety
 Pointers must be valid for the stated lengths (`points`: `3 * num_points`,
 `out_values`: `num_points`).
 */
enum FsdStatus fsd_decoder_eval(const struct FsdDecoder *decoder,
                                const double *latent,
                                size_t latent_len,
                                const double *points,
                                size_t num_points,
                                double *out_values);

/*
 Batched extraction for `num_objects` latents stored back to back.

 # Safety
 `latents` must hold `num_objects * latent_dim` values; `out` valid for one
 write.
 */
enum FsdStatus fsd_extract_decoder(const struct FsdDecoder *decoder,
                                   const double *latents,
                                   size_t num_objects,
                                   uint32_t lod_end,
                                   double prune_factor,
                                   struct FsdSurfaces **out);

/*
 Extraction of a single analytic shape.

 # Safety
 `params` must hold `num_params` values; `out` valid for one write.
 */
enum FsdStatus fsd_extract_shape(enum FsdShapeKind kind,
                                 const double *params,
                                 size_t num_params,
                                 uint32_t lod_end,
                                 double prune_factor,
                                 struct FsdSurfaces **out);

/*
 # Safety
 `surfaces` must be null or a live handle.
 */
size_t fsd_surfaces_count(const struct FsdSurfaces *surfaces);

/*
 Point count of object `index`, zero when out of range.

 # Safety
 `surfaces` must be null or a live handle.
 */
size_t fsd_surface_point_count(const struct FsdSurfaces *surfaces, size_t index);

/*
 Copies the projected points of object `index` as xyz triples.

 # Safety
 `out` must be valid for `3 * capacity_points` writes.
 */
enum FsdStatus fsd_surface_copy_points(const struct FsdSurfaces *surfaces,
                                       size_t index,
                                       double *out,
                                       size_t capacity_points);

/*
 Copies the unit normals of object `index` as xyz triples.

 # Safety
 `out` must be valid for `3 * capacity_points` writes.
 */
enum FsdStatus fsd_surface_copy_normals(const struct FsdSurfaces *surfaces,
                                        size_t index,
                                        double *out,
                                        size_t capacity_points);

/*
 # Safety
 `surfaces` must be null or a handle not yet freed.
 */
void fsd_surfaces_free(struct FsdSurfaces *surfaces);

/*
 Thresholded Chamfer distance between two xyz clouds.

 # Safety
 `a` and `b` must hold `3 * na` and `3 * nb` values; `out_value` valid for
 one write.
 */
enum FsdStatus fsd_chamfer(const double *a,
                           size_t na,
                           const double *b,
                           size_t nb,
                           double epsilon,
                           enum FsdChamferMode mode,
                           double *out_value);

/*
 Nearest rotation to a row-major 3x3 matrix.

 # Safety
 `matrix` and `out_rotation` must each hold 9 values.
 */
enum FsdStatus fsd_orthogonalize(const double *matrix, double *out_rotation);

/*
 Library version as a static NUL-terminated string.
 */
const char *fsd_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FSD_H */
