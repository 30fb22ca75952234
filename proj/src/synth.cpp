// SPDX-License-Identifier: Apache-2.0
#include "uqtrace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"

namespace uqtrace::synth {

namespace {

void check_tokens(const ToyLM& model, const std::vector<int>& tokens) {
  for (int t : tokens)
    if (t < 0 || static_cast<unsigned>(t) >= model.vocab)
      throw ValidationError("token out of vocabulary range: " +
                            std::to_string(t));
}

std::vector<double> hidden_state(const ToyLM& model,
                                 const std::vector<int>& prefix) {
  std::vector<double> h(model.dim, 0.0);
  if (prefix.empty()) return h;
  for (int t : prefix) {
    const double* row = &model.embed[static_cast<size_t>(t) * model.dim];
    for (unsigned j = 0; j < model.dim; ++j) h[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(prefix.size());
  for (double& v : h) v *= inv;
  return h;
}

std::vector<double> softmax_from_hidden(const ToyLM& model,
                                        const std::vector<double>& h) {
  std::vector<double> logits(model.vocab, 0.0);
  for (unsigned v = 0; v < model.vocab; ++v) {
    const double* row = &model.output[static_cast<size_t>(v) * model.dim];
    double z = 0.0;
    for (unsigned j = 0; j < model.dim; ++j) z += row[j] * h[j];
    logits[v] = z;
  }
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - zmax);
    sum += z;
  }
  for (double& z : logits) z /= sum;
  return logits;
}

double entropy_nat(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return std::max(0.0, h);
}

}  // namespace

ToyLM ToyLM::random(unsigned vocab, unsigned dim, unsigned seed, double scale) {
  if (vocab < 2 || vocab > 64) throw ValidationError("vocab must be in [2, 64]");
  if (dim == 0) throw ValidationError("dim must be positive");
  ToyLM m;
  m.vocab = vocab;
  m.dim = dim;
  m.embed.resize(static_cast<size_t>(vocab) * dim);
  m.output.resize(static_cast<size_t>(vocab) * dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (double& v : m.embed) v = normal(rng);
  for (double& v : m.output) v = normal(rng);
  return m;
}

double ToyLM::get_param(size_t i) const {
  return i < embed.size() ? embed[i] : output[i - embed.size()];
}

void ToyLM::set_param(size_t i, double v) {
  if (i < embed.size())
    embed[i] = v;
  else
    output[i - embed.size()] = v;
}

std::vector<double> toy_forward(const ToyLM& model,
                                const std::vector<int>& prefix) {
  check_tokens(model, prefix);
  return softmax_from_hidden(model, hidden_state(model, prefix));
}

GradResult toy_prob_gradient(const ToyLM& model, const std::vector<int>& prefix,
                             int target) {
  check_tokens(model, prefix);
  if (prefix.empty())
    throw ValidationError("gradient requires a nonempty prefix");
  if (target < 0 || static_cast<unsigned>(target) >= model.vocab)
    throw ValidationError("target out of vocabulary range");

  const unsigned d = model.dim;
  const unsigned V = model.vocab;
  const std::vector<double> h = hidden_state(model, prefix);
  const std::vector<double> p = softmax_from_hidden(model, h);
  const double p_y = p[static_cast<size_t>(target)];

  GradResult result;
  result.p_target = p_y;
  result.grad.assign(model.param_count(), 0.0);

  // d p_y / d h = p_y * (u_y - sum_v p_v u_v)
  std::vector<double> g_h(d, 0.0);
  for (unsigned v = 0; v < V; ++v) {
    const double* u = &model.output[static_cast<size_t>(v) * d];
    const double coef =
        p_y * ((static_cast<unsigned>(target) == v ? 1.0 : 0.0) - p[v]);
    for (unsigned j = 0; j < d; ++j) g_h[j] += coef * u[j];
  }

  // Embedding rows: d h / d e_w = (count_w / T) * I.
  std::vector<double> count(V, 0.0);
  for (int t : prefix) count[static_cast<size_t>(t)] += 1.0;
  const double inv_t = 1.0 / static_cast<double>(prefix.size());
  for (unsigned w = 0; w < V; ++w) {
    if (count[w] == 0.0) continue;
    const double c = count[w] * inv_t;
    double* slot = &result.grad[static_cast<size_t>(w) * d];
    for (unsigned j = 0; j < d; ++j) slot[j] = c * g_h[j];
  }

  // Output rows: d p_y / d u_v = p_y * (delta - p_v) * h.
  const size_t output_base = model.embed.size();
  for (unsigned v = 0; v < V; ++v) {
    const double coef =
        p_y * ((static_cast<unsigned>(target) == v ? 1.0 : 0.0) - p[v]);
    double* slot = &result.grad[output_base + static_cast<size_t>(v) * d];
    for (unsigned j = 0; j < d; ++j) slot[j] = coef * h[j];
  }

  result.grad_sq_norm = std::inner_product(result.grad.begin(),
                                           result.grad.end(),
                                           result.grad.begin(), 0.0);
  return result;
}

double mc_parameter_variance(const ToyLM& model, const std::vector<int>& prefix,
                             int target, double sigma, size_t n_samples,
                             unsigned seed) {
  if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
  if (n_samples < 2) throw ValidationError("need at least 2 samples");
  check_tokens(model, prefix);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ToyLM perturbed = model;
  const size_t n_params = model.param_count();

  // Welford accumulation of the sample variance of p(target | prefix).
  double mean = 0.0, m2 = 0.0;
  for (size_t s = 0; s < n_samples; ++s) {
    for (size_t i = 0; i < n_params; ++i)
      perturbed.set_param(i, model.get_param(i) + sigma * normal(rng));
    const double p = toy_forward(perturbed, prefix)[static_cast<size_t>(target)];
    const double delta = p - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (p - mean);
  }
  return m2 / static_cast<double>(n_samples - 1);
}

SpanMeasures toy_span_measures(const ToyLM& model,
                               const std::vector<int>& prefix,
                               const std::vector<int>& span) {
  if (span.empty()) throw ValidationError("answer span is empty");
  check_tokens(model, prefix);
  check_tokens(model, span);

  SpanMeasures out;
  out.p_seq = 1.0;
  std::vector<double> grad_log_sum(model.param_count(), 0.0);
  std::vector<int> context = prefix;
  double entropy_sum = 0.0;
  for (int tok : span) {
    const GradResult g = toy_prob_gradient(model, context, tok);
    const std::vector<double> dist = toy_forward(model, context);
    entropy_sum += entropy_nat(dist);
    out.p_seq *= g.p_target;
    // grad P = P * sum_j grad p_j / p_j
    const double inv_p = 1.0 / std::max(g.p_target, 1e-300);
    for (size_t i = 0; i < grad_log_sum.size(); ++i)
      grad_log_sum[i] += g.grad[i] * inv_p;
    context.push_back(tok);
  }
  out.mean_entropy = entropy_sum / static_cast<double>(span.size());
  double sq = 0.0;
  for (double v : grad_log_sum) {
    const double g = out.p_seq * v;
    sq += g * g;
  }
  out.grad_sq_norm = sq;
  return out;
}

ingest::TraceRecord toy_trace_with_answer_channel(
    const ToyLM& model, const std::vector<int>& prompt, size_t max_len,
    const std::vector<int>& answer_span) {
  if (prompt.empty()) throw ValidationError("prompt must be nonempty");
  check_tokens(model, prompt);
  check_tokens(model, answer_span);
  if (answer_span.empty()) throw ValidationError("answer span is empty");

  ingest::TraceRecord record;
  record.id = "toy-0";
  record.model_name = "toy-lm";
  record.dataset = "toy";
  record.vocab_size = model.vocab;

  std::vector<int> tokens = prompt;
  std::string trace_text;
  for (size_t step = 0; step < max_len; ++step) {
    const std::vector<double> dist = toy_forward(model, tokens);
    const int next = static_cast<int>(
        std::max_element(dist.begin(), dist.end()) - dist.begin());

    uq::TokenStep ts;
    ts.p_target_trace = dist[static_cast<size_t>(next)];
    ts.entropy_trace = entropy_nat(dist);
    ts.grad_sq_trace = toy_prob_gradient(model, tokens, next).grad_sq_norm;

    const SpanMeasures span = toy_span_measures(model, tokens, answer_span);
    ts.p_target_answer = span.p_seq;
    ts.entropy_answer = span.mean_entropy;
    ts.grad_sq_answer = span.grad_sq_norm;

    record.steps.push_back(ts);
    if (!trace_text.empty()) trace_text.push_back(' ');
    trace_text += "tok" + std::to_string(next);
    tokens.push_back(next);
  }

  std::string answer_digits;
  for (int tok : answer_span) answer_digits += std::to_string(tok);
  record.reference_answer = answer_digits;
  record.raw_text = trace_text + "\n\nThe answer is " + answer_digits;
  record.split_pos = trace_text.size() + 2;
  record.answer_text = record.raw_text.substr(*record.split_pos);
  return record;
}

CohortSpec cohort_spec_from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  CohortSpec spec;
  spec.n_traces = j.value("n_traces", spec.n_traces);
  spec.len_min = j.value("len_min", spec.len_min);
  spec.len_max = j.value("len_max", spec.len_max);
  spec.noise = j.value("noise", spec.noise);
  spec.positive_fraction = j.value("positive_fraction", spec.positive_fraction);
  spec.vocab_size = j.value("vocab_size", spec.vocab_size);
  spec.seed = j.value("seed", spec.seed);
  spec.late_divergence = j.value("late_divergence", spec.late_divergence);
  spec.emit_answer_channel =
      j.value("emit_answer_channel", spec.emit_answer_channel);
  spec.model_name = j.value("model", spec.model_name);
  spec.dataset = j.value("dataset", spec.dataset);
  auto read_class = [&](const char* key, ClassParams& p) {
    if (!j.contains(key)) return;
    const auto& cj = j.at(key);
    p.level = cj.value("level", p.level);
    p.slope = cj.value("slope", p.slope);
    p.level_jitter = cj.value("level_jitter", p.level_jitter);
    p.slope_jitter = cj.value("slope_jitter", p.slope_jitter);
  };
  read_class("correct", spec.correct);
  read_class("incorrect", spec.incorrect);
  return spec;
}

namespace {

void validate_spec(const CohortSpec& spec) {
  if (spec.n_traces < 2) throw ValidationError("cohort needs >= 2 traces");
  if (spec.len_min < 4 || spec.len_max < spec.len_min)
    throw ValidationError("invalid trace-length range");
  if (!(spec.noise >= 0.0)) throw ValidationError("noise must be nonnegative");
  if (!(spec.positive_fraction > 0.0 && spec.positive_fraction < 1.0))
    throw ValidationError("positive_fraction must lie in (0, 1)");
  if (spec.vocab_size < 2) throw ValidationError("vocab_size must be >= 2");
  for (const ClassParams* p : {&spec.correct, &spec.incorrect}) {
    if (!std::isfinite(p->level) || !std::isfinite(p->slope) ||
        !std::isfinite(p->level_jitter) || !std::isfinite(p->slope_jitter))
      throw ValidationError("class parameters must be finite");
  }
}

struct ChannelScalars {
  double p, h, g;
};

// Latent-to-channel mapping. Committal is planted directly and the
// token probability backed out of p(1-p); everything stays inside its
// physical range (entropy <= log V, committal <= 0.25).
ChannelScalars map_latent(double latent, double log_v) {
  const double u = std::clamp(latent, 0.0, 1.0);
  ChannelScalars out;
  out.h = u * 0.8 * log_v;
  const double committal = u * 0.2499;
  out.p = 0.5 * (1.0 + std::sqrt(1.0 - 4.0 * committal));
  out.g = u * 2.0;
  return out;
}

}  // namespace

std::vector<ingest::TraceRecord> generate_cohort(const CohortSpec& spec) {
  validate_spec(spec);
  const double log_v = std::log(static_cast<double>(spec.vocab_size));
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const size_t n_pos = std::max<size_t>(
      1, static_cast<size_t>(std::llround(spec.positive_fraction *
                                          static_cast<double>(spec.n_traces))));

  std::vector<ingest::TraceRecord> records;
  records.reserve(spec.n_traces);
  for (size_t i = 0; i < spec.n_traces; ++i) {
    const bool correct = i < n_pos;
    const ClassParams& params = correct ? spec.correct : spec.incorrect;

    const size_t len =
        spec.len_min +
        static_cast<size_t>(rng() % (spec.len_max - spec.len_min + 1));
    const double jitter = params.level_jitter * normal(rng);
    const double trace_slope = params.slope + params.slope_jitter * normal(rng);

    ingest::TraceRecord r;
    r.id = "synth-" + std::to_string(i);
    r.model_name = spec.model_name;
    r.dataset = spec.dataset;
    r.vocab_size = spec.vocab_size;
    r.is_correct = correct;
    r.reference_answer = "42";
    r.raw_text = std::string("synthetic uncertainty trace\n\nThe answer is ") +
                 (correct ? "42" : "7");
    r.split_pos = std::string("synthetic uncertainty trace\n\n").size();
    r.answer_text = r.raw_text.substr(*r.split_pos);
    r.extracted_answer = correct ? "42" : "7";

    const double mid = static_cast<double>(len - 1) / 2.0;
    for (size_t t = 0; t < len; ++t) {
      const double pos = static_cast<double>(t);
      double level = params.level;
      if (spec.late_divergence && !correct) {
        // Divergence confined to the back half of the trace.
        const double ramp = std::clamp(
            (pos / static_cast<double>(len - 1) - 0.5) * 2.0, 0.0, 1.0);
        level = spec.correct.level +
                (spec.incorrect.level - spec.correct.level) * ramp;
      }
      const double drift = trace_slope * (pos - mid) / static_cast<double>(len);
      const double latent =
          std::clamp(level + jitter + drift + spec.noise * normal(rng),
                     0.01, 0.99);
      const ChannelScalars tr = map_latent(latent, log_v);

      uq::TokenStep step;
      step.p_target_trace = tr.p;
      step.entropy_trace = tr.h;
      step.grad_sq_trace = tr.g;
      if (spec.emit_answer_channel) {
        const double latent_ans = std::clamp(
            latent + 0.5 * spec.noise * normal(rng), 0.01, 0.99);
        const ChannelScalars ans = map_latent(latent_ans, log_v);
        step.p_target_answer = ans.p;
        step.entropy_answer = ans.h;
        step.grad_sq_answer = ans.g;
      }
      r.steps.push_back(step);
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace uqtrace::synth
