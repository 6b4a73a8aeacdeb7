#ifndef LDTM_H
#define LDTM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LdtmMode {
  LDTM_MODE_IDENTITY = 0,
  LDTM_MODE_HALF_DECAY = 1,
  LDTM_MODE_FULL_DECAY = 2,
  LDTM_MODE_LEARNED = 3,
} LdtmMode;

/**
 * Result of every fallible call. The usage, data and numeric codes match
 * the command-line exit codes.
 */
typedef enum LdtmStatus {
  LDTM_STATUS_OK = 0,
  LDTM_STATUS_USAGE = 2,
  LDTM_STATUS_DATA = 3,
  LDTM_STATUS_NUMERIC = 4,
  LDTM_STATUS_NULL_POINTER = 10,
  LDTM_STATUS_PANIC = 11,
} LdtmStatus;

typedef enum LdtmDirection {
  LDTM_DIRECTION_I_TO_J = 0,
  LDTM_DIRECTION_J_TO_I = 1,
  LDTM_DIRECTION_TIE = 2,
} LdtmDirection;

/**
 * Opaque corpus handle.
 */
typedef struct LdtmCorpus LdtmCorpus;

/**
 * Opaque model handle.
 */
typedef struct LdtmModel LdtmModel;

typedef struct LdtmTrainOptions {
  size_t topics;
  double alpha;
  double beta;
  size_t iterations;
  enum LdtmMode mode;
  uint64_t seed;
  /**
   * Nonzero selects the `K beta` topic-item normalizer.
   */
  int32_t k_beta_normalizer;
} LdtmTrainOptions;

typedef struct LdtmTscResult {
  double f_forward;
  double f_backward;
  enum LdtmDirection direction;
} LdtmTscResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *ldtm_last_error_message(void);

struct LdtmTrainOptions ldtm_train_options_default(void);

/**
 * Reads adoption events and prunes items seen fewer than `min_frequency`
 * times.
 */
enum LdtmStatus ldtm_corpus_load_events(const char *path,
                                        uint64_t min_frequency,
                                        struct LdtmCorpus **out);

enum LdtmStatus ldtm_corpus_load_snapshot(const char *path, struct LdtmCorpus **out);

size_t ldtm_corpus_num_users(const struct LdtmCorpus *corpus);

size_t ldtm_corpus_vocab_size(const struct LdtmCorpus *corpus);

size_t ldtm_corpus_total_tokens(const struct LdtmCorpus *corpus);

void ldtm_corpus_free(struct LdtmCorpus *corpus);

/**
 * Fits a model with the default decay search. `options` may be null for
 * the defaults of [`ldtm_train_options_default`].
 */
enum LdtmStatus ldtm_train(const struct LdtmCorpus *corpus,
                           const struct LdtmTrainOptions *options,
                           struct LdtmModel **out);

enum LdtmStatus ldtm_model_load(const char *path, struct LdtmModel **out);

enum LdtmStatus ldtm_model_save(const struct LdtmModel *model, const char *path);

size_t ldtm_model_topics(const struct LdtmModel *model);

size_t ldtm_model_items(const struct LdtmModel *model);

size_t ldtm_model_num_users(const struct LdtmModel *model);

/**
 * Number of time steps of `user`, or 0 if out of range.
 */
size_t ldtm_model_steps(const struct LdtmModel *model, size_t user);

/**
 * Copies the filtered topic distribution of `user` at 1-based step `t`
 * into `out`, which must hold exactly `ldtm_model_topics` values.
 */
enum LdtmStatus ldtm_model_theta(const struct LdtmModel *model,
                                 size_t user,
                                 size_t t,
                                 double *out,
                                 size_t len);

/**
 * Copies topic `k`'s item distribution into `out` of length
 * `ldtm_model_items`.
 */
enum LdtmStatus ldtm_model_phi(const struct LdtmModel *model, size_t k, double *out, size_t len);

void ldtm_model_free(struct LdtmModel *model);

/**
 * TSC in both directions for two row-major `steps x topics` series.
 * `classical` nonzero selects the classical F statistic.
 */
enum LdtmStatus ldtm_tsc_pair(const double *i_series,
                              const double *j_series,
                              size_t steps,
                              size_t topics,
                              size_t tau,
                              size_t width,
                              size_t lookahead,
                              int32_t classical,
                              struct LdtmTscResult *out);

/**
 * KL divergence from the expected prior to the expected posterior for one
 * transition.
 */
enum LdtmStatus ldtm_kl_objective(const double *x_post_prev,
                                  const double *psi,
                                  const double *mu,
                                  size_t topics,
                                  double alpha,
                                  double *out);

/**
 * Gradient of [`ldtm_kl_objective`] in `mu`, written to `out[0..topics]`.
 */
enum LdtmStatus ldtm_kl_gradient(const double *x_post_prev,
                                 const double *psi,
                                 const double *mu,
                                 size_t topics,
                                 double alpha,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LDTM_H */
