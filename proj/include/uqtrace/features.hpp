// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uqtrace/ingest.hpp"
#include "uqtrace/uq_core.hpp"

namespace uqtrace::features {

inline constexpr size_t kMinTraceLength = 4;

struct SegmentMeans {
  double mu_early = 0.0;
  double mu_mid = 0.0;
  double mu_late = 0.0;
};

// Quartile segment means with e = max(1, floor(n/4)):
// early = values[0, e), mid = values[e, n-e), late = values[n-e, n).
// Requires n >= 4.
SegmentMeans segment_means(std::span<const double> values);

struct Trend {
  double slope = 0.0;
  double r2 = 0.0;
};

// OLS of values against positions 0..n-1. Constant series -> (0, 0).
// Requires n >= 2.
Trend linear_trend(std::span<const double> values);

enum class FeatureKind { MuEarly, MuMid, MuLate, Slope, R2 };

inline constexpr FeatureKind kAllFeatures[] = {
    FeatureKind::MuEarly, FeatureKind::MuMid, FeatureKind::MuLate,
    FeatureKind::Slope, FeatureKind::R2};

inline constexpr FeatureKind kStaticFeatures[] = {
    FeatureKind::MuEarly, FeatureKind::MuMid, FeatureKind::MuLate};
inline constexpr FeatureKind kDynamicFeatures[] = {FeatureKind::Slope,
                                                   FeatureKind::R2};

const char* feature_id(FeatureKind k);  // "mu_early" ... "r2"

// Canonical feature column name, e.g. "dist_tr_mu_early".
std::string feature_name(uq::UType t, uq::Channel c, FeatureKind k);

struct SeriesProfile {
  double mu_early = 0.0;
  double mu_mid = 0.0;
  double mu_late = 0.0;
  double slope = 0.0;
  double r2 = 0.0;

  double get(FeatureKind k) const;
};

// The per-trace summary: one SeriesProfile per available series,
// absent series simply missing from the map (30 scalars when all six
// series exist).
struct TraceProfile {
  std::map<std::pair<uq::UType, uq::Channel>, SeriesProfile> entries;

  bool has(uq::UType t, uq::Channel c) const {
    return entries.count({t, c}) != 0;
  }
  size_t scalar_count() const { return entries.size() * 5; }
};

TraceProfile profile_trace(const ingest::TraceRecord& record,
                           double log_base = kNaturalBase);

// profile_trace over the first min(limit, n) steps. limit >= 4.
TraceProfile prefix_profile(const ingest::TraceRecord& record,
                            size_t limit_tokens,
                            double log_base = kNaturalBase);

// A subset of the 6 series and 5 per-series features.
struct FeatureSelector {
  std::string id;
  std::vector<std::pair<uq::UType, uq::Channel>> series;
  std::vector<FeatureKind> kinds;

  static FeatureSelector full();
  static FeatureSelector channel(uq::Channel c);
  static FeatureSelector single(uq::UType t, uq::Channel c);

  size_t width() const { return series.size() * kinds.size(); }
};

struct FeatureMatrix {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;             // 1 = correct, 0 = incorrect
  std::vector<std::string> names;      // column names, selector order
  std::vector<size_t> record_index;    // row -> index into input records
  size_t dropped = 0;                  // inputs missing a selected feature
};

// Assembles the classifier input. Rows keep input order; records
// missing any selected feature are dropped and counted. All records
// must carry a correctness label. prefix_limit/prefix_fraction switch
// to prefix profiles (at most one may be set).
FeatureMatrix build_matrix(const std::vector<ingest::TraceRecord>& records,
                           const FeatureSelector& selector,
                           double log_base = kNaturalBase,
                           std::optional<size_t> prefix_limit = std::nullopt,
                           std::optional<double> prefix_fraction = std::nullopt);

void write_matrix_csv(const std::string& path, const FeatureMatrix& matrix);

}  // namespace uqtrace::features
