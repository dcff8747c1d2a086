#ifndef BMM_MTC_H
#define BMM_MTC_H

#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum BmmStatus {
  BMM_STATUS_OK = 0,
  BMM_STATUS_NULL_POINTER = 1,
  BMM_STATUS_INVALID_ARGUMENT = 2,
  BMM_STATUS_INFEASIBLE = 3,
  BMM_STATUS_IO = 4,
  BMM_STATUS_FORMAT = 5,
  BMM_STATUS_PRECONDITION = 6,
  BMM_STATUS_PANIC = 7,
} BmmStatus;

// Outcome of a clustering run.
typedef struct BmmClusterRun BmmClusterRun;

// Binary dataset.
typedef struct BmmDataset BmmDataset;

// Bernoulli mixture parameters.
typedef struct BmmModel BmmModel;

// Parameters of the clustering search.
typedef struct BmmAlgoParams {
  double alpha;
  double delta;
  double epsilon;
  size_t l_sep;
  size_t d;
  double tau;
  double beta;
} BmmAlgoParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *bmm_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *bmm_version(void);

// Builds a dataset from `n * l` row-major cells, each 0 or 1.
//
// # Safety
// `cells` must point to `n * l` readable bytes and `out` must be writable.
enum BmmStatus bmm_dataset_from_cells(const uint8_t *cells,
                                      size_t n,
                                      size_t l,
                                      struct BmmDataset **out);

// Loads a CSV or binary dataset; the format is detected from the contents.
//
// # Safety
// `path` must be a NUL-terminated string and `out` must be writable.
enum BmmStatus bmm_dataset_load(const char *path, struct BmmDataset **out);

// Saves a dataset as binary when `binary` is nonzero, CSV otherwise.
//
// # Safety
// `ds` must be a live dataset handle and `path` a NUL-terminated string.
enum BmmStatus bmm_dataset_save(const struct BmmDataset *ds, const char *path, int32_t binary);

// Row count, or 0 for NULL.
//
// # Safety
// `ds` must be NULL or a live dataset handle.
size_t bmm_dataset_rows(const struct BmmDataset *ds);

// Column count, or 0 for NULL.
//
// # Safety
// `ds` must be NULL or a live dataset handle.
size_t bmm_dataset_cols(const struct BmmDataset *ds);

// Reads cell `(i, j)` into `out`.
//
// # Safety
// `ds` must be a live dataset handle and `out` writable.
enum BmmStatus bmm_dataset_get(const struct BmmDataset *ds, size_t i, size_t j, uint8_t *out);

// Releases a dataset; NULL is ignored.
//
// # Safety
// `ds` must be NULL or a handle not yet freed.
void bmm_dataset_free(struct BmmDataset *ds);

// Builds a mixture from a row-major `k x l` frequency matrix and `k` weights.
//
// # Safety
// `p` must point to `k * l` doubles, `w` to `k` doubles, `out` writable.
enum BmmStatus bmm_model_new(const double *p,
                             size_t k,
                             size_t l,
                             const double *w,
                             struct BmmModel **out);

// Releases a model; NULL is ignored.
//
// # Safety
// `model` must be NULL or a handle not yet freed.
void bmm_model_free(struct BmmModel *model);

// Draws `n` rows. When `labels_out` is non-NULL it receives the 1-based
// generating component of each row.
//
// # Safety
// `model` must be live, `out` writable, and `labels_out` NULL or writable
// for `n` entries.
enum BmmStatus bmm_sample(const struct BmmModel *model,
                          size_t n,
                          uint64_t seed,
                          uint32_t *labels_out,
                          struct BmmDataset **out);

// Total correlation of the whole dataset.
//
// # Safety
// `ds` must be live and `out` writable.
enum BmmStatus bmm_total_correlation(const struct BmmDataset *ds, double *out);

// Maximal total correlation over all `d`-column subsets. When
// `argmax_out` is non-NULL it receives the `d` maximizing column indices.
//
// # Safety
// `ds` must be live, `out` writable, and `argmax_out` NULL or writable for
// `d` entries.
enum BmmStatus bmm_max_total_correlation(const struct BmmDataset *ds,
                                         size_t d,
                                         size_t *argmax_out,
                                         double *out);

// Derives `d`, `tau` and `beta`. A `d_override` of 0 derives `d` from the
// tolerances.
//
// # Safety
// `out` must be writable.
enum BmmStatus bmm_derive_params(double alpha,
                                 double delta,
                                 double epsilon,
                                 size_t l_sep,
                                 size_t d_override,
                                 struct BmmAlgoParams *out);

// Runs the clustering search. A `search_cap` of 0 uses the default. A run
// that accepts no partition still succeeds; see
// [`bmm_cluster_run_accepted`].
//
// # Safety
// `ds` and `params` must be valid pointers and `out` writable.
enum BmmStatus bmm_cluster(const struct BmmDataset *ds,
                           const struct BmmAlgoParams *params,
                           uint64_t search_cap,
                           struct BmmClusterRun **out);

// 1 when a partition was accepted, 0 otherwise (including NULL).
//
// # Safety
// `run` must be NULL or a live handle.
int32_t bmm_cluster_run_accepted(const struct BmmClusterRun *run);

// Cluster count of the accepted partition, or 0.
//
// # Safety
// `run` must be NULL or a live handle.
size_t bmm_cluster_run_kappa(const struct BmmClusterRun *run);

// Number of candidate partitions tested.
//
// # Safety
// `run` must be NULL or a live handle.
uint64_t bmm_cluster_run_partitions_tested(const struct BmmClusterRun *run);

// Copies the accepted labels (1-based) into `out`, which holds `len`
// entries and must match the row count.
//
// # Safety
// `run` must be live and `out` writable for `len` entries.
enum BmmStatus bmm_cluster_run_labels(const struct BmmClusterRun *run, uint32_t *out, size_t len);

// Releases a cluster run; NULL is ignored.
//
// # Safety
// `run` must be NULL or a handle not yet freed.
void bmm_cluster_run_free(struct BmmClusterRun *run);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* BMM_MTC_H */
