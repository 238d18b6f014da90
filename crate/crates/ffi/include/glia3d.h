#ifndef GLIA3D_H
#define GLIA3D_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum Glia3dStatus {
  GLIA3D_STATUS_OK = 0,
  GLIA3D_STATUS_NULL_POINTER = 1,
  GLIA3D_STATUS_INVALID_ARGUMENT = 2,
  GLIA3D_STATUS_CONFIG_ERROR = 3,
  GLIA3D_STATUS_INPUT_ERROR = 4,
  GLIA3D_STATUS_PROCESSING_ERROR = 5,
  GLIA3D_STATUS_OUT_OF_RANGE = 6,
  GLIA3D_STATUS_PANIC = 7,
} Glia3dStatus;

/**
 * Cell label volume.
 */
typedef struct Glia3dLabels Glia3dLabels;

/**
 * Per-cell feature rows.
 */
typedef struct Glia3dTable Glia3dTable;

/**
 * Intensity volume.
 */
typedef struct Glia3dVolume Glia3dVolume;

/**
 * Segmentation settings.
 */
typedef struct Glia3dSegmentParams {
  /**
   * Negative selects Otsu's threshold; otherwise a value in [0, 1].
   */
  double threshold;
  /**
   * 6, 18 or 26.
   */
  uint32_t connectivity;
  size_t min_voxels;
  /**
   * Split components above this volume in µm³; 0 or less disables.
   */
  double max_volume;
  size_t k_max;
  uint64_t seed;
} Glia3dSegmentParams;

/**
 * One feature row. Lengths are NaN when the cell has no branches.
 */
typedef struct Glia3dCellRow {
  uint32_t cell_id;
  double centroid_x_um;
  double centroid_y_um;
  double centroid_z_um;
  double cell_volume_um3;
  double territory_volume_um3;
  double ramification_index;
  uint32_t n_endpoints;
  uint32_t n_branchpoints;
  double branch_len_avg_um;
  double branch_len_max_um;
  double branch_len_min_um;
} Glia3dCellRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *glia3d_version(void);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library on this thread.
 */
const char *glia3d_last_error(void);

/**
 * Load a multi-page TIFF or a directory of slices (raw intensities).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum Glia3dStatus glia3d_volume_load(const char *path,
                                     double sx,
                                     double sy,
                                     double sz,
                                     struct Glia3dVolume **out);

/**
 * Copy `nx * ny * nz` intensities (x fastest, then y, then z).
 *
 * # Safety
 * `data` must point to `nx * ny * nz` floats; `out` must be writable.
 */
enum Glia3dStatus glia3d_volume_from_buffer(const float *data,
                                            size_t nx,
                                            size_t ny,
                                            size_t nz,
                                            double sx,
                                            double sy,
                                            double sz,
                                            struct Glia3dVolume **out);

/**
 * # Safety
 * `vol` must come from this library; the out pointers must be writable.
 */
enum Glia3dStatus glia3d_volume_dims(const struct Glia3dVolume *vol,
                                     size_t *nx,
                                     size_t *ny,
                                     size_t *nz);

/**
 * Rescale intensities to [0, 1] in place.
 *
 * # Safety
 * `vol` must come from this library.
 */
enum Glia3dStatus glia3d_volume_normalize(struct Glia3dVolume *vol);

/**
 * Otsu threshold of a normalized volume.
 *
 * # Safety
 * `vol` must come from this library; `out` must be writable.
 */
enum Glia3dStatus glia3d_volume_otsu(const struct Glia3dVolume *vol, double *out);

/**
 * # Safety
 * `vol` must come from this library or be null; it is invalid afterwards.
 */
void glia3d_volume_free(struct Glia3dVolume *vol);

/**
 * Threshold, label, filter and split a normalized volume.
 *
 * # Safety
 * `vol` and `params` must be valid; `out` must be writable.
 */
enum Glia3dStatus glia3d_segment(const struct Glia3dVolume *vol,
                                 const struct Glia3dSegmentParams *params,
                                 struct Glia3dLabels **out);

/**
 * # Safety
 * `labels` must come from this library; `out` must be writable.
 */
enum Glia3dStatus glia3d_labels_count(const struct Glia3dLabels *labels, uint32_t *out);

/**
 * # Safety
 * `labels` must come from this library or be null.
 */
void glia3d_labels_free(struct Glia3dLabels *labels);

/**
 * Measure every cell. Cells that cannot be measured are counted by
 * [`glia3d_table_failures`] and left out of the rows.
 *
 * # Safety
 * `labels` must come from this library; `out` must be writable.
 */
enum Glia3dStatus glia3d_analyze(const struct Glia3dLabels *labels, struct Glia3dTable **out);

/**
 * # Safety
 * `table` must come from this library; `out` must be writable.
 */
enum Glia3dStatus glia3d_table_len(const struct Glia3dTable *table, size_t *out);

/**
 * # Safety
 * `table` must come from this library; `out` must be writable.
 */
enum Glia3dStatus glia3d_table_failures(const struct Glia3dTable *table, size_t *out);

/**
 * # Safety
 * `table` must come from this library; `out` must be writable.
 */
enum Glia3dStatus glia3d_table_row(const struct Glia3dTable *table,
                                   size_t index,
                                   struct Glia3dCellRow *out);

/**
 * Write the rows as a feature-table CSV, atomically.
 *
 * # Safety
 * `table` must come from this library; `path` must be NUL-terminated.
 */
enum Glia3dStatus glia3d_table_write_csv(const struct Glia3dTable *table, const char *path);

/**
 * # Safety
 * `table` must come from this library or be null.
 */
void glia3d_table_free(struct Glia3dTable *table);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GLIA3D_H */
