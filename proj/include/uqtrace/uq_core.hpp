// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "uqtrace/common.hpp"

namespace uqtrace::ingest {
struct TraceRecord;
}

namespace uqtrace::uq {

// The three uncertainty types and the two target channels. A type is
// *what* is measured (entropy, Bernoulli variance, squared gradient
// norm); a channel is *which target* the measure is taken against
// (the next generated token vs the eventual final answer span).
enum class UType { Distributional, Committal, Epistemic };
enum class Channel { Trace, Answer };

inline constexpr UType kAllTypes[] = {UType::Distributional, UType::Committal,
                                      UType::Epistemic};
inline constexpr Channel kAllChannels[] = {Channel::Trace, Channel::Answer};

const char* utype_id(UType t);    // "dist" | "comm" | "epi"
const char* channel_id(Channel c);  // "tr" | "ans"

// Per-position scalars as emitted by the log producer. Trace-channel
// probability and entropy are mandatory; everything else is optional.
// Answer-channel presence is all-or-none per record (validated at
// ingest), and the answer-channel probability/gradient are already
// sequence-level quantities (span probability, span-probability
// gradient) computed by the producer.
struct TokenStep {
  std::optional<double> p_target_trace;
  std::optional<double> entropy_trace;
  std::optional<double> grad_sq_trace;
  std::optional<double> p_target_answer;
  std::optional<double> entropy_answer;
  std::optional<double> grad_sq_answer;

  bool has_answer_channel() const {
    return p_target_answer.has_value() && entropy_answer.has_value();
  }
};

// One of the (up to) six type x channel time series of a generation.
struct UncertaintySeries {
  UType utype;
  Channel channel;
  std::vector<double> values;
};

// Predictive entropy of a full next-token distribution, in the given
// log base. 0*log(0) is taken as 0. The distribution must be valid:
// entries >= 0, summing to 1 within 1e-9.
double distributional_uncertainty(const std::vector<double>& probs,
                                  double log_base = kNaturalBase);

// Bernoulli variance p*(1-p) of the target's probability.
double committal_uncertainty(double p_target);

// Delta-method variance of the target probability under isotropic
// parameter perturbation: sigma_sq * ||grad p||^2.
double epistemic_uncertainty(double grad_sq_norm, double sigma_sq = 1.0);

// Sequence-level extensions for a multi-token target span.
double sequence_distributional(const std::vector<double>& entropies);
double sequence_committal(const std::vector<double>& token_probs);

// Mean per-token KL divergence from the uniform distribution,
// KL(p||U) = log V - H, computable from entropies alone (natural-log
// units). Higher means more certain.
double self_certainty(const std::vector<double>& entropies,
                      unsigned vocab_size);

// Derives the available uncertainty series of a record. A series is
// omitted (not zero-filled) when its inputs are absent; the epistemic
// series of a channel is omitted unless every step carries a gradient
// norm for that channel.
std::vector<UncertaintySeries> build_series(const ingest::TraceRecord& record,
                                            double log_base = kNaturalBase);

}  // namespace uqtrace::uq
