// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "uqtrace/eval.hpp"
#include "uqtrace/synth.hpp"

using namespace uqtrace;
using namespace uqtrace::eval;

namespace {

// Brute-force pair enumeration; the oracle auroc() must match exactly.
double auroc_bruteforce(const std::vector<double>& scores,
                        const std::vector<int>& labels) {
  long long wins2 = 0;  // doubled so ties stay integral
  long long pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins2 += 2;
      else if (scores[i] == scores[j])
        wins2 += 1;
    }
  }
  return static_cast<double>(wins2) / (2.0 * static_cast<double>(pairs));
}

}  // namespace

TEST_CASE("auroc worked examples") {
  CHECK(auroc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
  CHECK(auroc({0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0}) == 0.5);
  CHECK(auroc({0.9, 0.4, 0.6}, {1, 1, 0}) == 0.5);
  CHECK_THROWS(auroc({0.1, 0.2}, {1, 1}));
  CHECK_THROWS(auroc({0.1}, {0}));
}

TEST_CASE("auroc equals brute force on 100 random instances") {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const size_t n_pos = 1 + rng() % 200;
    const size_t n_neg = 1 + rng() % 200;
    std::vector<double> scores;
    std::vector<int> labels;
    // Coarse grid of score values forces heavy ties.
    std::uniform_int_distribution<int> grid(0, 20);
    for (size_t i = 0; i < n_pos; ++i) {
      scores.push_back(grid(rng) / 20.0);
      labels.push_back(1);
    }
    for (size_t i = 0; i < n_neg; ++i) {
      scores.push_back(grid(rng) / 20.0);
      labels.push_back(0);
    }
    CHECK(auroc(scores, labels) == auroc_bruteforce(scores, labels));
  }
}

TEST_CASE("auroc invariances") {
  std::mt19937 rng(55);
  std::uniform_real_distribution<> dist(0.0, 1.0);
  std::vector<double> scores(60);
  std::vector<int> labels(60);
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = dist(rng);
    labels[i] = rng() % 2;
  }
  labels[0] = 1;
  labels[1] = 0;
  const double base = auroc(scores, labels);

  std::vector<double> neg(scores), mono(scores);
  for (auto& s : neg) s = -s;
  for (auto& s : mono) s = std::exp(3.0 * s) + 1.0;
  CHECK(base + auroc(neg, labels) == 1.0);
  CHECK(auroc(mono, labels) == base);
}

TEST_CASE("cv_auroc on planted cohorts") {
  synth::CohortSpec sep;
  sep.n_traces = 120;
  sep.seed = 9;
  sep.correct.level = 0.35;
  sep.incorrect.level = 0.65;
  sep.correct.level_jitter = sep.incorrect.level_jitter = 0.0;
  const auto cohort = synth::generate_cohort(sep);
  const auto m = features::build_matrix(cohort, features::FeatureSelector::full());
  const auto folds = learn::stratified_kfold(m.labels, 5, 42);
  const auto r = cv_auroc(m.rows, m.labels, ClassifierSpec::LogReg, folds);
  CHECK(r.fold_aurocs.size() == 5);
  CHECK(r.mean >= 0.95);
  // mean/std consistent with the folds.
  double mean = 0.0;
  for (double a : r.fold_aurocs) mean += a;
  mean /= 5.0;
  CHECK(r.mean == doctest::Approx(mean).epsilon(1e-12));

  // Identical classes: chance level.
  synth::CohortSpec null_spec = sep;
  null_spec.incorrect = null_spec.correct;
  null_spec.noise = 0.05;
  const auto null_cohort = synth::generate_cohort(null_spec);
  const auto nm =
      features::build_matrix(null_cohort, features::FeatureSelector::full());
  const auto nf = learn::stratified_kfold(nm.labels, 5, 42);
  const auto nr = cv_auroc(nm.rows, nm.labels, ClassifierSpec::LogReg, nf);
  CHECK(nr.mean >= 0.40);
  CHECK(nr.mean <= 0.60);
}

TEST_CASE("self certainty auroc direction and rank invariance") {
  synth::CohortSpec spec;
  spec.n_traces = 80;
  spec.seed = 4;
  spec.correct.level = 0.3;    // lower entropy for correct traces
  spec.incorrect.level = 0.7;
  spec.correct.level_jitter = spec.incorrect.level_jitter = 0.0;
  auto cohort = synth::generate_cohort(spec);
  std::vector<int> labels;
  for (const auto& r : cohort) labels.push_back(*r.is_correct ? 1 : 0);
  const auto folds = learn::stratified_kfold(labels, 5, 42);
  const auto r = self_certainty_auroc(cohort, folds);
  CHECK(r.mean > 0.5);

  auto no_vocab = cohort;
  for (auto& rec : no_vocab) rec.vocab_size.reset();
  CHECK_THROWS(self_certainty_auroc(no_vocab, folds));
}

TEST_CASE("early detection sweep saturation and flagging") {
  synth::CohortSpec spec;
  spec.n_traces = 60;
  spec.seed = 21;
  spec.correct.level = 0.4;
  spec.incorrect.level = 0.6;
  const auto cohort = synth::generate_cohort(spec);

  const auto selector = features::FeatureSelector::full();
  const auto curve = early_detection_sweep(cohort, {8, 1000}, LimitMode::Tokens,
                                           ClassifierSpec::LogReg, selector);
  REQUIRE(curve.points.size() == 2);
  CHECK(curve.points[1].computed);

  // Saturated point equals the full-trace CV result bit-identically.
  const auto m = features::build_matrix(cohort, selector);
  const auto folds = learn::stratified_kfold(m.labels, 5, 42);
  const auto full = cv_auroc(m.rows, m.labels, ClassifierSpec::LogReg, folds);
  CHECK(curve.points[1].result.fold_aurocs == full.fold_aurocs);
  CHECK(curve.points[1].result.mean == full.mean);
  CHECK(curve.points[1].result.stddev == full.stddev);

  // Non-increasing limits rejected; undersized cohorts flagged.
  CHECK_THROWS(early_detection_sweep(cohort, {16, 8}, LimitMode::Tokens,
                                     ClassifierSpec::LogReg, selector));
  const std::vector<ingest::TraceRecord> tiny(cohort.begin(),
                                              cohort.begin() + 6);
  const auto flagged = early_detection_sweep(tiny, {8}, LimitMode::Tokens,
                                             ClassifierSpec::LogReg, selector);
  CHECK_FALSE(flagged.points[0].computed);
}

TEST_CASE("fraction mode accepts (0,1] only") {
  synth::CohortSpec spec;
  spec.n_traces = 60;
  spec.seed = 3;
  const auto cohort = synth::generate_cohort(spec);
  const auto selector = features::FeatureSelector::full();
  CHECK_THROWS(early_detection_sweep(cohort, {0.5, 1.5}, LimitMode::Fraction,
                                     ClassifierSpec::LogReg, selector));
  const auto curve = early_detection_sweep(cohort, {0.5, 1.0},
                                           LimitMode::Fraction,
                                           ClassifierSpec::LogReg, selector);
  CHECK(curve.points.size() == 2);
}

TEST_CASE("importance over prefix separates static from dynamic") {
  // Separation only in level: static share dominates.
  synth::CohortSpec level;
  level.n_traces = 120;
  level.seed = 31;
  level.correct.level = 0.35;
  level.incorrect.level = 0.65;
  level.correct.level_jitter = level.incorrect.level_jitter = 0.0;
  const auto level_cohort = synth::generate_cohort(level);
  const auto level_points = importance_over_prefix(
      level_cohort, {1.0}, LimitMode::Fraction, features::FeatureSelector::full());
  REQUIRE(level_points.size() == 1);
  REQUIRE(level_points[0].computed);
  CHECK(level_points[0].static_share + level_points[0].dynamic_share ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(level_points[0].static_share > 0.9);

  // Separation only in trend strength: correct traces carry a strong
  // random-sign planted slope, incorrect traces stay flat. Level and
  // slope means agree across classes, so only the dynamic features
  // (chiefly the fit quality) discriminate.
  // Single-series profile: the mu contrast of a profile is itself a
  // signed slope estimate, so across the full 30-feature set the ridge
  // fit shares trend weight with the mu features. Per series the
  // dynamic features dominate cleanly.
  synth::CohortSpec slope;
  slope.n_traces = 240;
  slope.seed = 35;
  slope.correct.slope_jitter = 0.8;
  const auto slope_cohort = synth::generate_cohort(slope);
  const auto slope_points = importance_over_prefix(
      slope_cohort, {1.0}, LimitMode::Fraction,
      features::FeatureSelector::single(uq::UType::Distributional,
                                       uq::Channel::Trace));
  REQUIRE(slope_points[0].computed);
  CHECK(slope_points[0].dynamic_share > 0.9);
}

TEST_CASE("zscore heatmap centering and direction") {
  synth::CohortSpec spec;
  spec.n_traces = 100;
  spec.seed = 8;
  spec.correct.level = 0.35;
  spec.incorrect.level = 0.65;  // incorrect traces more uncertain
  spec.correct.level_jitter = spec.incorrect.level_jitter = 0.0;
  const auto cohort = synth::generate_cohort(spec);
  const auto cells = zscore_heatmap(cohort, features::FeatureSelector::full());
  REQUIRE(cells.size() == 60);  // 30 features x 2 groups

  size_t n_correct = 0, n_incorrect = 0;
  for (const auto& r : cohort) (*r.is_correct ? n_correct : n_incorrect)++;
  for (size_t i = 0; i < cells.size(); i += 2) {
    const auto& inc = cells[i];
    const auto& cor = cells[i + 1];
    REQUIRE(inc.feature == cor.feature);
    // Weighted group means cancel per feature.
    CHECK(static_cast<double>(n_incorrect) * inc.value +
              static_cast<double>(n_correct) * cor.value ==
          doctest::Approx(0.0).epsilon(1e-9));
    // Planted level offset: incorrect-group mu features positive.
    if (inc.feature.find("mu_") != std::string::npos &&
        inc.feature.find("_tr_") != std::string::npos) {
      CHECK(inc.value > 0.0);
      CHECK(cor.value < 0.0);
    }
  }
}

TEST_CASE("peak detection") {
  CHECK(detect_peaks(std::vector<double>(50, 1.0), 10, 1.5).empty());

  std::vector<double> spike(401, 1.0);
  spike[200] = 10.0;
  const auto peaks = detect_peaks(spike, 200, 2.4);
  CHECK(peaks == std::vector<size_t>{200});

  std::vector<double> twin(900, 1.0);
  twin[100] = 9.0;
  twin[700] = 9.0;
  CHECK(detect_peaks(twin, 200, 2.4) == std::vector<size_t>{100, 700});

  CHECK(detect_peaks({1.0, 2.0}, 10, 2.0).empty());
}

TEST_CASE("smoothing and resampling") {
  const std::vector<double> v = {0.0, 3.0, 0.0};
  CHECK(smooth_series(v, 1) == v);
  CHECK(smooth_series(v, 3) == std::vector<double>{1.5, 1.0, 1.5});
  CHECK(smooth_series(std::vector<double>(5, 2.0), 3) ==
        std::vector<double>(5, 2.0));
  CHECK_THROWS(smooth_series(v, 2));

  const auto r = resample_linear({0.0, 1.0}, 3);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r[2] == 1.0);
  CHECK(resample_linear({4.0}, 3) == std::vector<double>{4.0, 4.0, 4.0});
}

TEST_CASE("averaged traces") {
  synth::CohortSpec spec;
  spec.n_traces = 40;
  spec.seed = 12;
  spec.correct.level = 0.3;
  spec.incorrect.level = 0.7;
  spec.correct.level_jitter = spec.incorrect.level_jitter = 0.0;
  const auto cohort = synth::generate_cohort(spec);
  const auto avg = averaged_traces(cohort, uq::UType::Distributional,
                                   uq::Channel::Trace, 100);
  REQUIRE(avg.correct_mean.size() == 100);
  REQUIRE(avg.incorrect_mean.size() == 100);
  CHECK(avg.n_correct + avg.n_incorrect == 40);
  double gap = 0.0;
  for (size_t i = 0; i < 100; ++i)
    gap += avg.incorrect_mean[i] - avg.correct_mean[i];
  CHECK(gap > 0.0);
}
