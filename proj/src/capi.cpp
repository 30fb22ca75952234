// SPDX-License-Identifier: Apache-2.0
#include "uqtrace.h"

#include <string>
#include <vector>

#include "uqtrace/eval.hpp"
#include "uqtrace/ingest.hpp"
#include "uqtrace/pipeline.hpp"
#include "uqtrace/uq_core.hpp"

namespace {

thread_local std::string g_last_error;

uqt_status fail(uqt_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

// Maps C++ exceptions onto the stable status codes.
template <typename F>
uqt_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return UQT_OK;
  } catch (const uqtrace::TooShortError& e) {
    return fail(UQT_ERR_INSUFFICIENT, e.what());
  } catch (const uqtrace::ValidationError& e) {
    return fail(UQT_ERR_VALIDATION, e.what());
  } catch (const uqtrace::ingest::ParseError& e) {
    return fail(UQT_ERR_VALIDATION, e.what());
  } catch (const uqtrace::ConfigError& e) {
    return fail(UQT_ERR_VALIDATION, e.what());
  } catch (const std::exception& e) {
    return fail(UQT_ERR_FAILURE, e.what());
  }
}

}  // namespace

extern "C" {

struct uqt_store {
  std::vector<uqtrace::ingest::TraceRecord> records;
};

const char* uqt_version(void) { return "1.0.0"; }

const char* uqt_last_error(void) { return g_last_error.c_str(); }

uqt_status uqt_distributional_uncertainty(const double* probs, size_t n,
                                          double log_base, double* out) {
  if (!probs || !out) return fail(UQT_ERR_ARG, "null pointer argument");
  return guarded([&] {
    const std::vector<double> p(probs, probs + n);
    const double base = log_base == 0.0 ? uqtrace::kNaturalBase : log_base;
    *out = uqtrace::uq::distributional_uncertainty(p, base);
  });
}

uqt_status uqt_committal_uncertainty(double p_target, double* out) {
  if (!out) return fail(UQT_ERR_ARG, "null pointer argument");
  return guarded([&] { *out = uqtrace::uq::committal_uncertainty(p_target); });
}

uqt_status uqt_epistemic_uncertainty(double grad_sq_norm, double sigma_sq,
                                     double* out) {
  if (!out) return fail(UQT_ERR_ARG, "null pointer argument");
  return guarded(
      [&] { *out = uqtrace::uq::epistemic_uncertainty(grad_sq_norm, sigma_sq); });
}

uqt_status uqt_sequence_distributional(const double* entropies, size_t n,
                                       double* out) {
  if (!entropies || !out) return fail(UQT_ERR_ARG, "null pointer argument");
  return guarded([&] {
    *out = uqtrace::uq::sequence_distributional(
        std::vector<double>(entropies, entropies + n));
  });
}

uqt_status uqt_sequence_committal(const double* token_probs, size_t n,
                                  double* out) {
  if (!token_probs || !out) return fail(UQT_ERR_ARG, "null pointer argument");
  return guarded([&] {
    *out = uqtrace::uq::sequence_committal(
        std::vector<double>(token_probs, token_probs + n));
  });
}

uqt_status uqt_self_certainty(const double* entropies, size_t n,
                              unsigned vocab_size, double* out) {
  if (!entropies || !out) return fail(UQT_ERR_ARG, "null pointer argument");
  return guarded([&] {
    *out = uqtrace::uq::self_certainty(
        std::vector<double>(entropies, entropies + n), vocab_size);
  });
}

uqt_status uqt_auroc(const double* scores, const int* labels, size_t n,
                     double* out) {
  if (!scores || !labels || !out)
    return fail(UQT_ERR_ARG, "null pointer argument");
  return guarded([&] {
    *out = uqtrace::eval::auroc(std::vector<double>(scores, scores + n),
                                std::vector<int>(labels, labels + n));
  });
}

uqt_status uqt_store_open(const char* jsonl_path, uqt_store** out) {
  if (!jsonl_path || !out) return fail(UQT_ERR_ARG, "null pointer argument");
  *out = nullptr;
  return guarded([&] {
    auto store = new uqt_store{uqtrace::ingest::read_jsonl(jsonl_path)};
    *out = store;
  });
}

void uqt_store_close(uqt_store* store) { delete store; }

size_t uqt_store_size(const uqt_store* store) {
  return store ? store->records.size() : 0;
}

size_t uqt_store_labeled_count(const uqt_store* store) {
  if (!store) return 0;
  size_t n = 0;
  for (const auto& r : store->records) n += r.is_correct.has_value();
  return n;
}

size_t uqt_store_answer_channel_count(const uqt_store* store) {
  if (!store) return 0;
  size_t n = 0;
  for (const auto& r : store->records) n += r.has_answer_channel();
  return n;
}

uqt_status uqt_run(const char* command, const char* config_json) {
  if (!command) return fail(UQT_ERR_ARG, "null command");
  std::string error;
  const int rc = uqtrace::pipeline::run(command, config_json ? config_json : "",
                                        error);
  switch (rc) {
    case uqtrace::pipeline::kOk:
      g_last_error.clear();
      return UQT_OK;
    case uqtrace::pipeline::kValidationFailure:
      return fail(UQT_ERR_VALIDATION, error);
    case uqtrace::pipeline::kInsufficientData:
      return fail(UQT_ERR_INSUFFICIENT, error);
    default:
      return fail(UQT_ERR_FAILURE, error);
  }
}

}  // extern "C"
