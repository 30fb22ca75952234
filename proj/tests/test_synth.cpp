// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "uqtrace/features.hpp"
#include "uqtrace/ingest.hpp"
#include "uqtrace/synth.hpp"
#include "uqtrace/uq_core.hpp"

using namespace uqtrace;
using namespace uqtrace::synth;

TEST_CASE("toy_forward basics") {
  ToyLM zero;
  zero.vocab = 8;
  zero.dim = 4;
  zero.embed.assign(zero.vocab * zero.dim, 0.0);
  zero.output.assign(zero.vocab * zero.dim, 0.0);
  const auto p = toy_forward(zero, {1, 2});
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 8).epsilon(1e-12));

  const auto model = ToyLM::random(12, 6, 5);
  const auto a = toy_forward(model, {3, 0, 7});
  const auto b = toy_forward(model, {3, 0, 7});
  CHECK(a == b);
  double sum = 0.0;
  for (double v : a) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(toy_forward(model, {99}));
}

TEST_CASE("analytic gradient matches central finite differences") {
  std::mt19937 rng(77);
  for (int config = 0; config < 50; ++config) {
    const unsigned vocab = 4 + rng() % 9;
    const unsigned dim = 2 + rng() % 5;
    auto model = ToyLM::random(vocab, dim, 1000 + static_cast<unsigned>(config));
    std::vector<int> prefix;
    const size_t plen = 1 + rng() % 5;
    for (size_t i = 0; i < plen; ++i)
      prefix.push_back(static_cast<int>(rng() % vocab));
    const int target = static_cast<int>(rng() % vocab);

    const auto g = toy_prob_gradient(model, prefix, target);
    CHECK(g.p_target == doctest::Approx(toy_forward(model, prefix)[static_cast<size_t>(target)]).epsilon(1e-12));

    const double h = 1e-5;
    double fd_sq = 0.0;
    size_t worst_checked = 0;
    for (size_t i = 0; i < model.param_count(); ++i) {
      const double orig = model.get_param(i);
      model.set_param(i, orig + h);
      const double up = toy_forward(model, prefix)[static_cast<size_t>(target)];
      model.set_param(i, orig - h);
      const double down = toy_forward(model, prefix)[static_cast<size_t>(target)];
      model.set_param(i, orig);
      const double fd = (up - down) / (2.0 * h);
      fd_sq += fd * fd;
      const double scale = std::max({std::fabs(fd), std::fabs(g.grad[i]), 1e-8});
      CHECK(std::fabs(g.grad[i] - fd) / scale < 1e-6);
      ++worst_checked;
    }
    CHECK(worst_checked == model.param_count());
    const double scale = std::max(fd_sq, 1e-12);
    CHECK(std::fabs(g.grad_sq_norm - fd_sq) / scale < 1e-5);
  }
}

TEST_CASE("Monte-Carlo variance validates the delta method") {
  std::mt19937 rng(31);
  int checked = 0;
  for (int trial = 0; trial < 25 && checked < 20; ++trial) {
    const auto model = ToyLM::random(10, 5, 400 + static_cast<unsigned>(trial));
    std::vector<int> prefix = {static_cast<int>(rng() % 10),
                               static_cast<int>(rng() % 10)};
    const int target = static_cast<int>(rng() % 10);
    const auto g = toy_prob_gradient(model, prefix, target);
    if (g.grad_sq_norm < 1e-6) continue;  // near-stationary, oracle degenerate
    const double sigma = 1e-3;
    const double predicted = sigma * sigma * g.grad_sq_norm;
    const double mc = mc_parameter_variance(model, prefix, target, sigma, 20000,
                                            777 + static_cast<unsigned>(trial));
    CHECK(std::fabs(mc - predicted) / predicted <= 0.10);
    ++checked;
  }
  CHECK(checked >= 20);
}

TEST_CASE("MC variance scales as sigma squared") {
  const auto model = ToyLM::random(8, 4, 6);
  const std::vector<int> prefix = {1, 2};
  const int target = 3;
  const double v1 = mc_parameter_variance(model, prefix, target, 1e-3, 20000, 5);
  const double v2 = mc_parameter_variance(model, prefix, target, 2e-3, 20000, 5);
  CHECK(v2 / v1 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("span measures reduce to single-token case") {
  const auto model = ToyLM::random(10, 5, 17);
  const std::vector<int> prefix = {0, 4};
  const auto span = toy_span_measures(model, prefix, {7});
  const auto g = toy_prob_gradient(model, prefix, 7);
  CHECK(span.p_seq == doctest::Approx(g.p_target).epsilon(1e-12));
  CHECK(span.grad_sq_norm == doctest::Approx(g.grad_sq_norm).epsilon(1e-12));

  // Two-token span: probability is the teacher-forced product.
  const auto two = toy_span_measures(model, prefix, {7, 2});
  const double p1 = toy_forward(model, prefix)[7];
  auto extended = prefix;
  extended.push_back(7);
  const double p2 = toy_forward(model, extended)[2];
  CHECK(two.p_seq == doctest::Approx(p1 * p2).epsilon(1e-12));
}

TEST_CASE("toy trace round-trips through the wire schema") {
  const auto model = ToyLM::random(14, 6, 23);
  const auto record = toy_trace_with_answer_channel(model, {1, 2}, 12, {5, 9});
  CHECK(record.token_count() == 12);
  CHECK(record.has_answer_channel());
  REQUIRE(record.split_pos.has_value());
  CHECK(*record.split_pos <= record.raw_text.size());

  const auto round = ingest::parse_record(ingest::serialize_record(record), 1);
  CHECK(ingest::serialize_record(round) == ingest::serialize_record(record));
  CHECK(uq::build_series(round).size() == 6);

  CHECK_THROWS(toy_trace_with_answer_channel(model, {}, 12, {5}));
}

TEST_CASE("generate_cohort determinism and validity") {
  CohortSpec spec;
  spec.n_traces = 30;
  spec.seed = 77;
  const auto a = generate_cohort(spec);
  const auto b = generate_cohort(spec);
  REQUIRE(a.size() == 30);
  for (size_t i = 0; i < a.size(); ++i)
    CHECK(ingest::serialize_record(a[i]) == ingest::serialize_record(b[i]));

  size_t n_correct = 0;
  for (const auto& r : a) {
    REQUIRE(r.is_correct.has_value());
    n_correct += *r.is_correct;
    CHECK(r.steps.size() >= spec.len_min);
    CHECK(r.steps.size() <= spec.len_max);
    CHECK(uq::build_series(r).size() == 6);
    // Round-trips through the wire schema.
    const auto round = ingest::parse_record(ingest::serialize_record(r), 1);
    CHECK(round.id == r.id);
    const double log_v = std::log(static_cast<double>(*r.vocab_size));
    for (const auto& s : r.steps) {
      CHECK(*s.entropy_trace <= log_v + 1e-9);
      CHECK(*s.p_target_trace >= 0.0);
      CHECK(*s.p_target_trace <= 1.0);
    }
  }
  CHECK(n_correct == 15);
}

TEST_CASE("cohort spec JSON parsing") {
  const auto spec = cohort_spec_from_json(R"({
    "n_traces": 44, "len_min": 10, "len_max": 20, "noise": 0.01,
    "positive_fraction": 0.25, "seed": 5, "late_divergence": true,
    "correct": {"level": 0.2, "slope": -0.1},
    "incorrect": {"level": 0.8, "slope": 0.1, "level_jitter": 0.05}
  })");
  CHECK(spec.n_traces == 44);
  CHECK(spec.len_min == 10);
  CHECK(spec.positive_fraction == 0.25);
  CHECK(spec.late_divergence);
  CHECK(spec.correct.level == 0.2);
  CHECK(spec.incorrect.level_jitter == 0.05);
  CHECK_THROWS(cohort_spec_from_json("{bad"));
}

TEST_CASE("planted slope is detectable against noise") {
  CohortSpec spec;
  spec.n_traces = 60;
  spec.seed = 41;
  spec.noise = 0.02;
  spec.correct.slope = -0.2;
  spec.incorrect.slope = 0.2;
  const auto cohort = generate_cohort(spec);
  double mean_c = 0.0, mean_i = 0.0, ss_c = 0.0;
  size_t n_c = 0, n_i = 0;
  std::vector<double> slopes_c;
  for (const auto& r : cohort) {
    const auto profile = features::profile_trace(r);
    const double slope =
        profile.entries.at({uq::UType::Distributional, uq::Channel::Trace}).slope;
    if (*r.is_correct) {
      mean_c += slope;
      slopes_c.push_back(slope);
      ++n_c;
    } else {
      mean_i += slope;
      ++n_i;
    }
  }
  mean_c /= static_cast<double>(n_c);
  mean_i /= static_cast<double>(n_i);
  for (double s : slopes_c) ss_c += (s - mean_c) * (s - mean_c);
  const double std_c = std::sqrt(ss_c / static_cast<double>(n_c));
  CHECK(std::fabs(mean_c - mean_i) >= 5.0 * std_c);
}
