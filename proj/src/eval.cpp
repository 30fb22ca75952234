// SPDX-License-Identifier: Apache-2.0
#include "uqtrace/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace uqtrace::eval {

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw ValidationError("score/label count mismatch");
  const size_t n = scores.size();
  size_t n_pos = 0;
  for (int y : labels) n_pos += (y == 1);
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw ValidationError("AUROC needs both classes");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Accumulate 2 * sum of positive midranks exactly in integers:
  // for a tie group spanning ranks [lo, hi] (1-based), midrank * 2 =
  // lo + hi for every member.
  unsigned long long rank2_pos_sum = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const unsigned long long rank2 =
        static_cast<unsigned long long>(i + 1) +
        static_cast<unsigned long long>(j + 1);
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank2_pos_sum += rank2;
    i = j + 1;
  }
  // U * 2 = 2*R_pos - n_pos*(n_pos+1)
  const unsigned long long u2 =
      rank2_pos_sum -
      static_cast<unsigned long long>(n_pos) * (n_pos + 1);
  return static_cast<double>(u2) /
         (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

const char* classifier_id(ClassifierSpec c) {
  return c == ClassifierSpec::LogReg ? "logreg" : "gboost";
}

const char* limit_mode_id(LimitMode m) {
  return m == LimitMode::Tokens ? "tokens" : "fraction";
}

namespace {

void finalize(CVResult& r) {
  const double k = static_cast<double>(r.fold_aurocs.size());
  r.mean = std::accumulate(r.fold_aurocs.begin(), r.fold_aurocs.end(), 0.0) / k;
  double ss = 0.0;
  for (double a : r.fold_aurocs) ss += (a - r.mean) * (a - r.mean);
  r.stddev = std::sqrt(ss / k);
}

template <typename T>
std::vector<T> gather(const std::vector<T>& v, const std::vector<size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace

CVResult cv_auroc(const learn::Matrix& x, const std::vector<int>& labels,
                  ClassifierSpec classifier,
                  const learn::FoldAssignment& folds) {
  if (x.size() != labels.size() || x.size() != folds.fold_of.size())
    throw ValidationError("matrix/labels/folds size mismatch");
  CVResult result;
  result.classifier = classifier_id(classifier);
  for (int f = 0; f < folds.k; ++f) {
    const auto train_idx = folds.train_indices(f);
    const auto test_idx = folds.test_indices(f);
    const learn::Matrix train_x = gather(x, train_idx);
    const auto train_y = gather(labels, train_idx);
    const learn::Matrix test_x = gather(x, test_idx);
    const auto test_y = gather(labels, test_idx);

    // Scaler fit on the training fold only.
    const learn::Scaler scaler = learn::fit_scaler(train_x);
    const learn::Matrix train_s = learn::apply_scaler(scaler, train_x);
    const learn::Matrix test_s = learn::apply_scaler(scaler, test_x);

    std::vector<double> scores;
    if (classifier == ClassifierSpec::LogReg) {
      const auto model = learn::fit_logreg(train_s, train_y);
      scores = learn::predict_proba(model, test_s);
    } else {
      const auto model = learn::fit_gboost(train_s, train_y);
      scores = learn::predict_proba(model, test_s);
    }
    result.fold_aurocs.push_back(auroc(scores, test_y));
  }
  finalize(result);
  return result;
}

double self_certainty_score(const ingest::TraceRecord& record) {
  if (!record.vocab_size)
    throw ValidationError("record '" + record.id + "' lacks vocab_size metadata");
  std::vector<double> entropies;
  entropies.reserve(record.steps.size());
  for (const auto& s : record.steps) {
    if (!s.entropy_trace)
      throw ValidationError("record '" + record.id + "' lacks trace entropies");
    entropies.push_back(*s.entropy_trace);
  }
  return uq::self_certainty(entropies, *record.vocab_size);
}

CVResult self_certainty_auroc(const std::vector<ingest::TraceRecord>& records,
                              const learn::FoldAssignment& folds) {
  if (records.size() != folds.fold_of.size())
    throw ValidationError("records/folds size mismatch");
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(records.size());
  for (const auto& r : records) {
    if (!r.is_correct)
      throw ValidationError("record '" + r.id + "' lacks a correctness label");
    scores.push_back(self_certainty_score(r));
    labels.push_back(*r.is_correct ? 1 : 0);
  }
  CVResult result;
  result.classifier = "self_certainty";
  for (int f = 0; f < folds.k; ++f) {
    const auto test_idx = folds.test_indices(f);
    result.fold_aurocs.push_back(
        auroc(gather(scores, test_idx), gather(labels, test_idx)));
  }
  finalize(result);
  return result;
}

namespace {

features::FeatureMatrix matrix_at_limit(
    const std::vector<ingest::TraceRecord>& records,
    const features::FeatureSelector& selector, double log_base, double limit,
    LimitMode mode) {
  if (mode == LimitMode::Tokens)
    return features::build_matrix(records, selector, log_base,
                                  static_cast<size_t>(limit), std::nullopt);
  return features::build_matrix(records, selector, log_base, std::nullopt,
                                limit);
}

void check_limits(const std::vector<double>& limits, LimitMode mode) {
  if (limits.empty()) throw ConfigError("no prefix limits given");
  for (size_t i = 0; i < limits.size(); ++i) {
    if (i > 0 && !(limits[i] > limits[i - 1]))
      throw ConfigError("prefix limits must be strictly increasing");
    if (mode == LimitMode::Tokens && limits[i] < 4)
      throw ConfigError("token limits must be at least 4");
    if (mode == LimitMode::Fraction && !(limits[i] > 0.0 && limits[i] <= 1.0))
      throw ConfigError("fraction limits must lie in (0, 1]");
  }
}

}  // namespace

EarlyDetectionCurve early_detection_sweep(
    const std::vector<ingest::TraceRecord>& records,
    const std::vector<double>& limits, LimitMode mode,
    ClassifierSpec classifier, const features::FeatureSelector& selector,
    double log_base, int folds, unsigned seed) {
  check_limits(limits, mode);
  EarlyDetectionCurve curve;
  curve.mode = mode;
  for (double limit : limits) {
    SweepPoint point;
    point.limit = limit;
    try {
      const auto m =
          matrix_at_limit(records, selector, log_base, limit, mode);
      point.n_usable = m.rows.size();
      if (m.rows.size() < 2 * static_cast<size_t>(folds))
        throw ConfigError("fewer than 2k usable traces");
      const auto fold_assign = learn::stratified_kfold(m.labels, folds, seed);
      point.result = cv_auroc(m.rows, m.labels, classifier, fold_assign);
      point.result.selector = selector.id;
      point.computed = true;
    } catch (const std::exception&) {
      point.computed = false;  // flagged, not computed
    }
    curve.points.push_back(std::move(point));
  }
  return curve;
}

std::vector<ImportancePoint> importance_over_prefix(
    const std::vector<ingest::TraceRecord>& records,
    const std::vector<double>& limits, LimitMode mode,
    const features::FeatureSelector& selector, double log_base, double lambda) {
  check_limits(limits, mode);
  std::vector<ImportancePoint> out;
  for (double limit : limits) {
    ImportancePoint point;
    point.limit = limit;
    try {
      const auto m = matrix_at_limit(records, selector, log_base, limit, mode);
      point.n_usable = m.rows.size();
      const auto scaler = learn::fit_scaler(m.rows);
      const auto scaled = learn::apply_scaler(scaler, m.rows);
      const auto model = learn::fit_logreg(scaled, m.labels, lambda);
      const auto shares = learn::coefficient_share(model);
      for (size_t j = 0; j < shares.size(); ++j) {
        const bool dynamic = m.names[j].ends_with("_slope") ||
                             m.names[j].ends_with("_r2");
        (dynamic ? point.dynamic_share : point.static_share) += shares[j];
      }
      point.computed = true;
    } catch (const std::exception&) {
      point.computed = false;
    }
    out.push_back(point);
  }
  return out;
}

std::vector<HeatmapCell> zscore_heatmap(
    const std::vector<ingest::TraceRecord>& records,
    const features::FeatureSelector& selector, double log_base) {
  const auto m = features::build_matrix(records, selector, log_base);
  size_t n_correct = 0;
  for (int y : m.labels) n_correct += (y == 1);
  if (n_correct < 2 || m.labels.size() - n_correct < 2)
    throw ValidationError("z-score heatmap needs >= 2 traces per group");

  std::vector<HeatmapCell> cells;
  const size_t n = m.rows.size();
  for (size_t j = 0; j < m.names.size(); ++j) {
    double mean = 0.0;
    for (const auto& row : m.rows) mean += row[j];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const auto& row : m.rows) ss += (row[j] - mean) * (row[j] - mean);
    const double std_dev = std::sqrt(ss / static_cast<double>(n));
    const bool degenerate = std_dev <= 0.0;

    double sum_correct = 0.0, sum_incorrect = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double z = degenerate ? 0.0 : (m.rows[i][j] - mean) / std_dev;
      (m.labels[i] == 1 ? sum_correct : sum_incorrect) += z;
    }
    for (bool correct : {false, true}) {
      HeatmapCell cell;
      cell.feature = m.names[j];
      cell.correct_group = correct;
      cell.degenerate = degenerate;
      const size_t count = correct ? n_correct : n - n_correct;
      cell.value = (correct ? sum_correct : sum_incorrect) /
                   static_cast<double>(count);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::vector<size_t> detect_peaks(const std::vector<double>& values,
                                 size_t window, double factor) {
  if (window < 2) throw ValidationError("peak window must be >= 2");
  if (!(factor > 1.0)) throw ValidationError("peak factor must exceed 1");
  const size_t n = values.size();
  std::vector<size_t> peaks;
  if (n < 3) return peaks;
  const size_t half = window / 2;
  for (size_t t = 0; t < n; ++t) {
    const size_t lo = t >= half ? t - half : 0;
    const size_t hi = std::min(n - 1, t + half);
    double sum = 0.0;
    size_t count = 0;
    for (size_t i = lo; i <= hi; ++i) {
      if (i == t) continue;
      sum += values[i];
      ++count;
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    if (values[t] > mean && values[t] >= factor * mean) peaks.push_back(t);
  }
  return peaks;
}

std::vector<double> smooth_series(const std::vector<double>& values,
                                  size_t window) {
  if (window < 1 || window % 2 == 0)
    throw ValidationError("smoothing window must be odd and >= 1");
  const size_t n = values.size();
  const size_t half = window / 2;
  std::vector<double> out(n);
  for (size_t t = 0; t < n; ++t) {
    const size_t lo = t >= half ? t - half : 0;
    const size_t hi = std::min(n - 1, t + half);
    double sum = 0.0;
    for (size_t i = lo; i <= hi; ++i) sum += values[i];
    out[t] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

std::vector<double> resample_linear(const std::vector<double>& values,
                                    size_t m) {
  if (values.empty() || m == 0)
    throw ValidationError("cannot resample an empty series");
  std::vector<double> out(m);
  if (values.size() == 1) {
    std::fill(out.begin(), out.end(), values.front());
    return out;
  }
  const double span = static_cast<double>(values.size() - 1);
  for (size_t i = 0; i < m; ++i) {
    const double x =
        m == 1 ? 0.0 : span * static_cast<double>(i) / static_cast<double>(m - 1);
    const size_t lo = std::min(static_cast<size_t>(x), values.size() - 2);
    const double frac = x - static_cast<double>(lo);
    out[i] = values[lo] * (1.0 - frac) + values[lo + 1] * frac;
  }
  return out;
}

AveragedTraces averaged_traces(const std::vector<ingest::TraceRecord>& records,
                               uq::UType utype, uq::Channel channel,
                               size_t positions, double log_base) {
  AveragedTraces out;
  out.correct_mean.assign(positions, 0.0);
  out.incorrect_mean.assign(positions, 0.0);
  for (const auto& r : records) {
    if (!r.is_correct) continue;
    for (const auto& series : uq::build_series(r, log_base)) {
      if (series.utype != utype || series.channel != channel) continue;
      if (series.values.empty()) continue;
      const auto resampled = resample_linear(series.values, positions);
      auto& target = *r.is_correct ? out.correct_mean : out.incorrect_mean;
      for (size_t i = 0; i < positions; ++i) target[i] += resampled[i];
      (*r.is_correct ? out.n_correct : out.n_incorrect) += 1;
    }
  }
  if (out.n_correct > 0)
    for (double& v : out.correct_mean) v /= static_cast<double>(out.n_correct);
  if (out.n_incorrect > 0)
    for (double& v : out.incorrect_mean)
      v /= static_cast<double>(out.n_incorrect);
  return out;
}

}  // namespace uqtrace::eval
