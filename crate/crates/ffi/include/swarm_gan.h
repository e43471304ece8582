#ifndef SWARM_GAN_H
#define SWARM_GAN_H

/* Generated by cbindgen from the swarm-gan-ffi crate. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_POINTER = 1,
  SG_STATUS_INVALID_INPUT = 2,
  SG_STATUS_INGESTION = 3,
  SG_STATUS_PARTITION = 4,
  SG_STATUS_DIVERGENCE = 5,
  SG_STATUS_PLANNING = 6,
  SG_STATUS_UNDEFINED_METRIC = 7,
  SG_STATUS_CONFIG = 8,
  SG_STATUS_IO = 9,
  SG_STATUS_BUFFER_TOO_SMALL = 10,
  SG_STATUS_INTERNAL = 11,
} SgStatus;

// Opaque dataset handle.
typedef struct SgDataset SgDataset;

// Opaque trained GAN handle.
typedef struct SgGan SgGan;

// Opaque partition handle.
typedef struct SgPartition SgPartition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or null if none.
// The pointer stays valid until the next failing call on the same thread.
const char *sg_last_error(void);

// Library version as a static NUL-terminated string.
const char *sg_version(void);

// Area under the ROC curve; `labels[i]` nonzero marks a positive.
//
// # Safety
// `scores` and `labels` must point to `n` readable elements; `out` must be writable.
enum SgStatus sg_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

// F1 of the positive class and accuracy at `threshold`.
//
// # Safety
// `scores` and `labels` must point to `n` readable elements; `f1` and `accuracy` must be writable.
enum SgStatus sg_f1_accuracy(const double *scores,
                             const uint8_t *labels,
                             size_t n,
                             double threshold,
                             double *f1,
                             double *accuracy);

// Isotropic Gaussian classes; see the core library for the geometry.
//
// # Safety
// `out` must be writable.
enum SgStatus sg_dataset_gaussian(size_t n_per_class,
                                  size_t n_classes,
                                  size_t n_features,
                                  double separation,
                                  uint64_t seed,
                                  struct SgDataset **out);

// Gaussian modes on a circle; the label is the mode index.
//
// # Safety
// `out` must be writable.
enum SgStatus sg_dataset_ring(size_t n_modes,
                              size_t n_per_mode,
                              double radius,
                              double sigma,
                              uint64_t seed,
                              struct SgDataset **out);

// Loads a CSV with a header row; `label_column` names the label column.
//
// # Safety
// `path` and `label_column` must be NUL-terminated strings; `out` must be writable.
enum SgStatus sg_dataset_load_csv(const char *path,
                                  const char *label_column,
                                  struct SgDataset **out);

// Number of rows; 0 for a null handle.
//
// # Safety
// `d` must be null or a live handle.
size_t sg_dataset_len(const struct SgDataset *d);

// # Safety
// `d` must be null or a live handle.
size_t sg_dataset_n_features(const struct SgDataset *d);

// # Safety
// `d` must be null or a live handle.
size_t sg_dataset_n_classes(const struct SgDataset *d);

// Copies the labels into `buf` (capacity `cap`).
//
// # Safety
// `d` must be a live handle and `buf` must have room for `cap` elements.
enum SgStatus sg_dataset_labels(const struct SgDataset *d, size_t *buf, size_t cap);

// # Safety
// `d` must be null or a handle not yet freed.
void sg_dataset_free(struct SgDataset *d);

// Dirichlet(beta) label-skew split of `d` across `n_participants`.
//
// # Safety
// `d` must be a live handle; `out` must be writable.
enum SgStatus sg_partition_dirichlet(const struct SgDataset *d,
                                     size_t n_participants,
                                     double beta,
                                     uint64_t seed,
                                     struct SgPartition **out);

// # Safety
// `p` must be null or a live handle.
size_t sg_partition_n_participants(const struct SgPartition *p);

// Number of rows held by `participant`.
//
// # Safety
// `p` must be a live handle; `out` must be writable.
enum SgStatus sg_partition_size(const struct SgPartition *p, size_t participant, size_t *out);

// Copies `participant`'s sorted row indices into `buf`.
//
// # Safety
// `p` must be a live handle and `buf` must have room for `cap` elements.
enum SgStatus sg_partition_indices(const struct SgPartition *p,
                                   size_t participant,
                                   size_t *buf,
                                   size_t cap);

// # Safety
// `p` must be null or a handle not yet freed.
void sg_partition_free(struct SgPartition *p);

// Loads a GAN file written by the `train-gan` command.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SgStatus sg_gan_load(const char *path, struct SgGan **out);

// # Safety
// `g` must be null or a live handle.
size_t sg_gan_n_features(const struct SgGan *g);

// # Safety
// `g` must be null or a live handle.
size_t sg_gan_n_classes(const struct SgGan *g);

// Writes `n` synthetic rows of `label`, row-major, into `buf` (capacity `cap`
// values, at least `n * n_features`). Same `seed` gives the same rows.
//
// # Safety
// `g` must be a live handle and `buf` must have room for `cap` values.
enum SgStatus sg_gan_sample(const struct SgGan *g,
                            size_t label,
                            size_t n,
                            uint64_t seed,
                            double *buf,
                            size_t cap);

// # Safety
// `g` must be null or a handle not yet freed.
void sg_gan_free(struct SgGan *g);

// Runs one command-line stage (`partition`, `train-gan`, `train-eval`, `sweep`)
// with the given config file and output directory.
//
// # Safety
// All arguments must be NUL-terminated strings.
enum SgStatus sg_run_stage(const char *stage, const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWARM_GAN_H */
