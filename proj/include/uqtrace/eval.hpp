// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uqtrace/features.hpp"
#include "uqtrace/learn.hpp"

namespace uqtrace::eval {

// Mann-Whitney rank statistic with midrank tie handling:
// (wins + 0.5 * ties) / (n_pos * n_neg). Exact (integer pair
// accounting); errors unless both classes are present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

enum class ClassifierSpec { LogReg, GBoost };
const char* classifier_id(ClassifierSpec c);

struct CVResult {
  std::vector<double> fold_aurocs;
  double mean = 0.0;
  double stddev = 0.0;  // population std over folds
  std::string classifier;
  std::string selector;
};

// Per fold: scaler fit on the training rows only, classifier fit on
// the scaled training rows, AUROC on the scaled test rows.
CVResult cv_auroc(const learn::Matrix& x, const std::vector<int>& labels,
                  ClassifierSpec classifier,
                  const learn::FoldAssignment& folds);

// Self-Certainty needs no training; scores are still reported per test
// fold so the column is comparable with the trained classifiers.
// Records must carry vocab_size metadata; order must match `folds`.
CVResult self_certainty_auroc(const std::vector<ingest::TraceRecord>& records,
                              const learn::FoldAssignment& folds);

// Per-trace Self-Certainty score (mean KL from uniform over the trace
// entropies).
double self_certainty_score(const ingest::TraceRecord& record);

enum class LimitMode { Tokens, Fraction };
const char* limit_mode_id(LimitMode m);

struct SweepPoint {
  double limit = 0.0;
  bool computed = false;   // false: too little usable data at this limit
  CVResult result;
  size_t n_usable = 0;
};

struct EarlyDetectionCurve {
  LimitMode mode = LimitMode::Tokens;
  std::vector<SweepPoint> points;
};

// Prefix-limited correctness prediction. Limits must be strictly
// increasing (tokens: each >= 4; fraction: in (0, 1]). Points with
// fewer than 2*k usable traces, or a class thinner than k, are flagged
// rather than computed.
EarlyDetectionCurve early_detection_sweep(
    const std::vector<ingest::TraceRecord>& records,
    const std::vector<double>& limits, LimitMode mode,
    ClassifierSpec classifier, const features::FeatureSelector& selector,
    double log_base = kNaturalBase, int folds = 5, unsigned seed = 42);

struct ImportancePoint {
  double limit = 0.0;
  bool computed = false;
  double static_share = 0.0;   // mu_early + mu_mid + mu_late shares
  double dynamic_share = 0.0;  // slope + r2 shares
  size_t n_usable = 0;
};

// LogReg coefficient shares, grouped into static vs dynamic features,
// as a function of the prefix limit. The model is fit on all usable
// rows (scaled) at each limit.
std::vector<ImportancePoint> importance_over_prefix(
    const std::vector<ingest::TraceRecord>& records,
    const std::vector<double>& limits, LimitMode mode,
    const features::FeatureSelector& selector, double log_base = kNaturalBase,
    double lambda = 1.0);

struct HeatmapCell {
  std::string feature;
  bool correct_group = false;
  double value = 0.0;      // group mean of cohort z-scores
  bool degenerate = false;  // zero-variance feature
};

// Features z-scored over the whole cohort, then averaged within the
// correct and incorrect groups.
std::vector<HeatmapCell> zscore_heatmap(
    const std::vector<ingest::TraceRecord>& records,
    const features::FeatureSelector& selector, double log_base = kNaturalBase);

// Positions t with values[t] strictly above, and at least factor
// times, the mean of the surrounding window (t excluded, truncated at
// the boundaries).
std::vector<size_t> detect_peaks(const std::vector<double>& values,
                                 size_t window = 200, double factor = 2.4);

// Centered moving average; window odd; boundaries truncated; length
// preserved.
std::vector<double> smooth_series(const std::vector<double>& values,
                                  size_t window);

// Linear-interpolation resampling to m positions.
std::vector<double> resample_linear(const std::vector<double>& values,
                                    size_t m);

struct AveragedTraces {
  std::vector<double> correct_mean;
  std::vector<double> incorrect_mean;
  size_t n_correct = 0;
  size_t n_incorrect = 0;
};

// Per-position mean over traces of one series, after resampling every
// trace to `positions` points.
AveragedTraces averaged_traces(const std::vector<ingest::TraceRecord>& records,
                               uq::UType utype, uq::Channel channel,
                               size_t positions = 100,
                               double log_base = kNaturalBase);

}  // namespace uqtrace::eval
