// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "uqtrace/ingest.hpp"

namespace uqtrace::synth {

// One-layer next-token model: h = mean of the prefix token embeddings,
// logits z_v = u_v . h, p = softmax(z). Small enough that
// finite-difference and Monte-Carlo oracles run in seconds.
struct ToyLM {
  unsigned vocab = 16;
  unsigned dim = 8;
  std::vector<double> embed;   // vocab * dim, row per token
  std::vector<double> output;  // vocab * dim, row per token

  static ToyLM random(unsigned vocab, unsigned dim, unsigned seed,
                      double scale = 0.5);

  size_t param_count() const { return embed.size() + output.size(); }
  double get_param(size_t i) const;
  void set_param(size_t i, double v);
};

// Next-token distribution given a (possibly empty) prefix.
// Deterministic; zero parameters give the uniform distribution.
std::vector<double> toy_forward(const ToyLM& model,
                                const std::vector<int>& prefix);

struct GradResult {
  double p_target = 0.0;
  double grad_sq_norm = 0.0;
  std::vector<double> grad;  // d p_target / d theta, flat over all params
};

// Analytic gradient of p(target | prefix, theta) over all parameters.
GradResult toy_prob_gradient(const ToyLM& model, const std::vector<int>& prefix,
                             int target);

// Empirical Var_theta[p(target | prefix, theta + sigma * eps)] with
// standard normal eps per parameter. This is the oracle the
// delta-method approximation is validated against.
double mc_parameter_variance(const ToyLM& model, const std::vector<int>& prefix,
                             int target, double sigma, size_t n_samples,
                             unsigned seed);

struct SpanMeasures {
  double p_seq = 0.0;         // product of per-token span probabilities
  double mean_entropy = 0.0;  // over span positions
  double grad_sq_norm = 0.0;  // of the span probability
};

// Sequence-level measures of a fixed answer span evaluated after the
// given prefix, teacher-forcing the span tokens.
SpanMeasures toy_span_measures(const ToyLM& model,
                               const std::vector<int>& prefix,
                               const std::vector<int>& span);

// Greedy generation with a full six-channel log: at every step the
// trace channel targets the token generated next and the answer
// channel targets the designated answer span conditioned on the
// current prefix (second pass). The produced record round-trips
// through the wire schema.
ingest::TraceRecord toy_trace_with_answer_channel(
    const ToyLM& model, const std::vector<int>& prompt, size_t max_len,
    const std::vector<int>& answer_span);

struct ClassParams {
  double level = 0.5;         // latent uncertainty baseline in [0, 1]
  double slope = 0.0;         // latent drift per normalized position
  double level_jitter = 0.0;  // per-trace baseline std
  double slope_jitter = 0.0;  // per-trace drift std (random sign)
};

struct CohortSpec {
  size_t n_traces = 200;
  size_t len_min = 40;
  size_t len_max = 80;
  double noise = 0.03;  // per-token latent noise std
  double positive_fraction = 0.5;
  unsigned vocab_size = 32;
  unsigned seed = 42;
  bool late_divergence = false;  // class offsets apply to the last half only
  bool emit_answer_channel = true;
  std::string model_name = "synth";
  std::string dataset = "cohort";
  ClassParams correct;
  ClassParams incorrect;
};

CohortSpec cohort_spec_from_json(const std::string& json_text);

// Planted-dynamics cohort. A latent series
//   u_t = clip01(level + slope * (t - (n-1)/2) / n + noise)
// drives all six channels (entropy = u * 0.8 * log V, committal
// target = u * 0.24 with p backed out of p(1-p), gradient = 2u), so
// class separations planted in level or slope surface in every
// series. Deterministic under seed; byte-identical JSONL on rerun.
std::vector<ingest::TraceRecord> generate_cohort(const CohortSpec& spec);

}  // namespace uqtrace::synth
