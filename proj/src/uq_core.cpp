// SPDX-License-Identifier: Apache-2.0
#include "uqtrace/uq_core.hpp"

#include <algorithm>
#include <cmath>

#include "uqtrace/ingest.hpp"

namespace uqtrace::uq {

namespace {

constexpr double kSumTolerance = 1e-9;

void validate_distribution(const std::vector<double>& probs) {
  if (probs.empty()) throw ValidationError("distribution is empty");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw ValidationError("distribution has a negative entry");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > kSumTolerance)
    throw ValidationError("distribution does not sum to 1 (sum=" +
                          fmt_double(sum) + ")");
}

}  // namespace

const char* utype_id(UType t) {
  switch (t) {
    case UType::Distributional: return "dist";
    case UType::Committal: return "comm";
    case UType::Epistemic: return "epi";
  }
  return "?";
}

const char* channel_id(Channel c) {
  return c == Channel::Trace ? "tr" : "ans";
}

double distributional_uncertainty(const std::vector<double>& probs,
                                  double log_base) {
  if (!(log_base > 1.0)) throw ValidationError("log base must exceed 1");
  validate_distribution(probs);
  const double denom = log_base == kNaturalBase ? 1.0 : std::log(log_base);
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(0.0, h / denom);
}

double committal_uncertainty(double p_target) {
  if (!(p_target >= 0.0 && p_target <= 1.0))
    throw ValidationError("target probability outside [0, 1]");
  return p_target * (1.0 - p_target);
}

double epistemic_uncertainty(double grad_sq_norm, double sigma_sq) {
  if (!(grad_sq_norm >= 0.0))
    throw ValidationError("squared gradient norm must be nonnegative");
  if (!(sigma_sq > 0.0)) throw ValidationError("sigma_sq must be positive");
  return sigma_sq * grad_sq_norm;
}

double sequence_distributional(const std::vector<double>& entropies) {
  if (entropies.empty()) throw ValidationError("empty entropy sequence");
  double sum = 0.0;
  for (double h : entropies) {
    if (!(h >= 0.0)) throw ValidationError("entropy must be nonnegative");
    sum += h;
  }
  return sum / static_cast<double>(entropies.size());
}

double sequence_committal(const std::vector<double>& token_probs) {
  if (token_probs.empty()) throw ValidationError("empty probability sequence");
  double p_seq = 1.0;
  for (double p : token_probs) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError("token probability outside [0, 1]");
    p_seq *= p;
  }
  return p_seq * (1.0 - p_seq);
}

double self_certainty(const std::vector<double>& entropies,
                      unsigned vocab_size) {
  if (entropies.empty()) throw ValidationError("empty entropy sequence");
  if (vocab_size < 2) throw ValidationError("vocab size must be >= 2");
  const double log_v = std::log(static_cast<double>(vocab_size));
  double sum = 0.0;
  for (double h : entropies) {
    if (!(h >= 0.0)) throw ValidationError("entropy must be nonnegative");
    if (h > log_v + 1e-6)
      throw ValidationError("entropy exceeds log(vocab size)");
    sum += log_v - h;
  }
  return sum / static_cast<double>(entropies.size());
}

std::vector<UncertaintySeries> build_series(const ingest::TraceRecord& record,
                                            double log_base) {
  if (record.steps.empty())
    throw ValidationError("record has no token steps");
  const double denom = log_base == kNaturalBase ? 1.0 : std::log(log_base);

  std::vector<UncertaintySeries> out;
  auto add = [&](UType t, Channel c, std::vector<double> values) {
    out.push_back({t, c, std::move(values)});
  };

  const size_t n = record.steps.size();

  // Trace channel. Each series requires its input on every step.
  {
    std::vector<double> dist(n), comm(n), epi(n);
    bool have_entropy = true, have_prob = true, have_grad = true;
    for (size_t i = 0; i < n; ++i) {
      const auto& s = record.steps[i];
      if (s.entropy_trace)
        dist[i] = *s.entropy_trace / denom;
      else
        have_entropy = false;
      if (s.p_target_trace)
        comm[i] = committal_uncertainty(*s.p_target_trace);
      else
        have_prob = false;
      if (s.grad_sq_trace)
        epi[i] = epistemic_uncertainty(*s.grad_sq_trace);
      else
        have_grad = false;
    }
    if (have_entropy) add(UType::Distributional, Channel::Trace, std::move(dist));
    if (have_prob) add(UType::Committal, Channel::Trace, std::move(comm));
    if (have_grad) add(UType::Epistemic, Channel::Trace, std::move(epi));
  }

  // Answer channel over the steps that carry it.
  {
    std::vector<double> dist, comm, epi;
    bool have_grad = true;
    for (const auto& s : record.steps) {
      if (!s.has_answer_channel()) continue;
      dist.push_back(*s.entropy_answer / denom);
      comm.push_back(committal_uncertainty(*s.p_target_answer));
      if (s.grad_sq_answer)
        epi.push_back(epistemic_uncertainty(*s.grad_sq_answer));
      else
        have_grad = false;
    }
    if (!dist.empty()) {
      add(UType::Distributional, Channel::Answer, std::move(dist));
      add(UType::Committal, Channel::Answer, std::move(comm));
      if (have_grad) add(UType::Epistemic, Channel::Answer, std::move(epi));
    }
  }
  return out;
}

}  // namespace uqtrace::uq
