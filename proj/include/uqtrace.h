/* SPDX-License-Identifier: Apache-2.0 */
/*
 * C API of the uqtrace shared library.
 *
 * The library treats language-model generation logs as uncertainty
 * time series: per-token distributional (entropy), committal
 * (Bernoulli variance) and epistemic (squared gradient norm) measures
 * over a trace channel and an answer channel, summarized into a
 * 30-feature trace profile that predicts final-answer correctness.
 *
 * Two layers are exposed:
 *  - scalar uncertainty measures, directly callable;
 *  - the full pipeline (uqt_run), driven by a JSON configuration, plus
 *    an opaque record-store handle for inspecting trace logs.
 *
 * All functions return uqt_status; uqt_last_error() describes the most
 * recent failure on the calling thread.
 */
#ifndef UQTRACE_H
#define UQTRACE_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum uqt_status {
  UQT_OK = 0,
  UQT_ERR_FAILURE = 1,     /* unclassified failure */
  UQT_ERR_VALIDATION = 2,  /* domain/range/schema violation */
  UQT_ERR_INSUFFICIENT = 3,/* not enough usable data */
  UQT_ERR_ARG = 4          /* null pointer / bad argument */
} uqt_status;

const char* uqt_version(void);

/* Message for the most recent error on this thread; empty on success. */
const char* uqt_last_error(void);

/* ---- scalar uncertainty measures ---------------------------------- */

/* Predictive entropy of a probability vector in the given log base
 * (pass 0 for natural log). */
uqt_status uqt_distributional_uncertainty(const double* probs, size_t n,
                                          double log_base, double* out);

/* Bernoulli variance p * (1 - p). */
uqt_status uqt_committal_uncertainty(double p_target, double* out);

/* Delta-method epistemic variance sigma_sq * grad_sq_norm. */
uqt_status uqt_epistemic_uncertainty(double grad_sq_norm, double sigma_sq,
                                     double* out);

/* Mean entropy over a span. */
uqt_status uqt_sequence_distributional(const double* entropies, size_t n,
                                       double* out);

/* Product of per-token probabilities, then Bernoulli variance. */
uqt_status uqt_sequence_committal(const double* token_probs, size_t n,
                                  double* out);

/* Mean per-token KL from uniform: log(vocab) - H (natural log). */
uqt_status uqt_self_certainty(const double* entropies, size_t n,
                              unsigned vocab_size, double* out);

/* Mann-Whitney AUROC of scores against binary labels (1 = positive). */
uqt_status uqt_auroc(const double* scores, const int* labels, size_t n,
                     double* out);

/* ---- record store -------------------------------------------------- */

typedef struct uqt_store uqt_store;

/* Parses a JSONL trace log (fails on the first malformed line). */
uqt_status uqt_store_open(const char* jsonl_path, uqt_store** out);
void uqt_store_close(uqt_store* store);
size_t uqt_store_size(const uqt_store* store);
/* Records carrying a correctness label. */
size_t uqt_store_labeled_count(const uqt_store* store);
/* Records carrying answer-channel scalars. */
size_t uqt_store_answer_channel_count(const uqt_store* store);

/* ---- pipeline ------------------------------------------------------ */

/* Executes one subcommand ("synth", "ingest", "split", "features",
 * "train", "evaluate", "early-detect", "report") with a JSON
 * configuration document. Artifacts are written to the paths named in
 * the configuration; the run is deterministic given the configuration
 * and inputs. */
uqt_status uqt_run(const char* command, const char* config_json);

#ifdef __cplusplus
}
#endif

#endif /* UQTRACE_H */
