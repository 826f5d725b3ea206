#ifndef PARAFAC2_H
#define PARAFAC2_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum Pf2Status {
  PF2_STATUS_OK = 0,
  PF2_STATUS_NULL_POINTER = 1,
  PF2_STATUS_INVALID_ARGUMENT = 2,
  PF2_STATUS_SHAPE = 3,
  PF2_STATUS_NUMERICAL = 4,
  PF2_STATUS_IO = 5,
  PF2_STATUS_FORMAT = 6,
  PF2_STATUS_PANIC = 7,
} Pf2Status;

typedef enum Pf2RegKind {
  PF2_REG_KIND_NONE = 0,
  PF2_REG_KIND_NON_NEG = 1,
  PF2_REG_KIND_RIDGE = 2,
  PF2_REG_KIND_TOTAL_VARIATION = 3,
  PF2_REG_KIND_GRAPH_LAPLACIAN = 4,
} Pf2RegKind;

/**
 * Fitted or true factors, with the fit summary when produced by a fit.
 */
typedef struct Pf2Model Pf2Model;

/**
 * Ragged stack of data slices.
 */
typedef struct Pf2Stack Pf2Stack;

/**
 * Regularizer of one mode; `strength` is ignored for `None` and `NonNeg`.
 */
typedef struct Pf2Reg {
  enum Pf2RegKind kind;
  double strength;
} Pf2Reg;

typedef struct Pf2AoAdmmOptions {
  size_t rank;
  struct Pf2Reg reg_a;
  struct Pf2Reg reg_b;
  struct Pf2Reg reg_d;
  size_t n_inits;
  uint64_t seed;
  size_t max_iter;
} Pf2AoAdmmOptions;

typedef struct Pf2AlsOptions {
  size_t rank;
  bool nonneg_a;
  bool nonneg_d;
  size_t n_inits;
  uint64_t seed;
  size_t max_iter;
} Pf2AlsOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Null-terminated library version; static storage.
 */
const char *pf2_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *pf2_last_error_message(void);

/**
 * Build a stack from `n_slices` column-major slices of `n_rows` rows stored
 * back to back in `data`; slice `k` has `cols[k]` columns.
 *
 * # Safety
 * `cols` must point to `n_slices` values and `data` to `data_len` values.
 */
enum Pf2Status pf2_stack_new(size_t n_rows,
                             size_t n_slices,
                             const size_t *cols,
                             const double *data,
                             size_t data_len,
                             struct Pf2Stack **out);

/**
 * Load the slices of a dataset directory.
 *
 * # Safety
 * `dir` must be a null-terminated string.
 */
enum Pf2Status pf2_stack_load_dir(const char *dir, struct Pf2Stack **out);

/**
 * # Safety
 * `stack` must be null or a handle not yet freed.
 */
void pf2_stack_free(struct Pf2Stack *stack);

/**
 * # Safety
 * Pointers must be valid.
 */
enum Pf2Status pf2_stack_dims(const struct Pf2Stack *stack, size_t *n_rows, size_t *n_slices);

/**
 * # Safety
 * Pointers must be valid.
 */
enum Pf2Status pf2_stack_slice_cols(const struct Pf2Stack *stack, size_t k, size_t *cols);

/**
 * Defaults: no regularization, 5 initializations, seed 0, 1000 iterations.
 */
struct Pf2AoAdmmOptions pf2_aoadmm_options_default(size_t rank);

/**
 * Defaults: nonnegative `D`, unconstrained `A`, 5 initializations, seed 0.
 */
struct Pf2AlsOptions pf2_als_options_default(size_t rank);

/**
 * Fit with AO-ADMM, keeping the initialization with the lowest objective.
 *
 * # Safety
 * Pointers must be valid.
 */
enum Pf2Status pf2_fit_aoadmm(const struct Pf2Stack *stack,
                              const struct Pf2AoAdmmOptions *options,
                              struct Pf2Model **out);

/**
 * Fit with the ALS baseline, keeping the initialization with the lowest
 * objective.
 *
 * # Safety
 * Pointers must be valid.
 */
enum Pf2Status pf2_fit_als(const struct Pf2Stack *stack,
                           const struct Pf2AlsOptions *options,
                           struct Pf2Model **out);

/**
 * Simulate a dataset; writes the noisy stack and the true factors.
 *
 * # Safety
 * Pointers must be valid.
 */
enum Pf2Status pf2_simulate(uint32_t setup,
                            double eta,
                            size_t n_rows,
                            size_t n_cols,
                            size_t n_slices,
                            size_t rank,
                            uint64_t seed,
                            struct Pf2Stack **stack_out,
                            struct Pf2Model **truth_out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void pf2_model_free(struct Pf2Model *model);

/**
 * # Safety
 * Pointers must be valid.
 */
enum Pf2Status pf2_model_dims(const struct Pf2Model *model,
                              size_t *rank,
                              size_t *n_rows,
                              size_t *n_slices);

/**
 * Copy `A` (`n_rows × rank`, column-major) into `buf`.
 *
 * # Safety
 * `buf` must hold `len` values.
 */
enum Pf2Status pf2_model_copy_a(const struct Pf2Model *model, double *buf, size_t len);

/**
 * Copy `D` (`n_slices × rank`, column-major; row `k` is `d_k`) into `buf`.
 *
 * # Safety
 * `buf` must hold `len` values.
 */
enum Pf2Status pf2_model_copy_d(const struct Pf2Model *model, double *buf, size_t len);

/**
 * Copy `B_k` (`cols_k × rank`, column-major) into `buf`.
 *
 * # Safety
 * `buf` must hold `len` values.
 */
enum Pf2Status pf2_model_copy_b(const struct Pf2Model *model, size_t k, double *buf, size_t len);

/**
 * Final objective, relative SSE, outer iterations and seed of the chosen
 * initialization. Any output pointer may be null.
 *
 * # Safety
 * Non-null pointers must be valid.
 */
enum Pf2Status pf2_model_summary(const struct Pf2Model *model,
                                 double *objective,
                                 double *relative_sse,
                                 size_t *iterations,
                                 uint64_t *chosen_seed);

/**
 * `‖X − X̂‖² / ‖X‖²` of `model` on `stack`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum Pf2Status pf2_relative_sse(const struct Pf2Stack *stack,
                                const struct Pf2Model *model,
                                double *out);

/**
 * Factor match score of `estimate` against `truth`, in [0, 1].
 *
 * # Safety
 * Pointers must be valid.
 */
enum Pf2Status pf2_fms(const struct Pf2Model *truth, const struct Pf2Model *estimate, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARAFAC2_H */
