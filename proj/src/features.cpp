// SPDX-License-Identifier: Apache-2.0
#include "uqtrace/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace uqtrace::features {

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

}  // namespace

SegmentMeans segment_means(std::span<const double> values) {
  const size_t n = values.size();
  if (n < kMinTraceLength)
    throw TooShortError("segment means need at least 4 values, got " +
                        std::to_string(n));
  const size_t e = std::max<size_t>(1, n / 4);
  SegmentMeans m;
  m.mu_early = mean_of(values.subspan(0, e));
  m.mu_mid = mean_of(values.subspan(e, n - 2 * e));
  m.mu_late = mean_of(values.subspan(n - e, e));
  return m;
}

Trend linear_trend(std::span<const double> values) {
  const size_t n = values.size();
  if (n < 2)
    throw TooShortError("linear trend needs at least 2 values, got " +
                        std::to_string(n));
  const double x_mean = static_cast<double>(n - 1) / 2.0;
  const double y_mean = mean_of(values);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - x_mean;
    const double dy = values[i] - y_mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (syy <= 0.0) return {0.0, 0.0};  // constant series, by convention
  const double slope = sxy / sxx;
  const double ss_res = syy - sxy * sxy / sxx;
  const double r2 = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  return {slope, r2};
}

const char* feature_id(FeatureKind k) {
  switch (k) {
    case FeatureKind::MuEarly: return "mu_early";
    case FeatureKind::MuMid: return "mu_mid";
    case FeatureKind::MuLate: return "mu_late";
    case FeatureKind::Slope: return "slope";
    case FeatureKind::R2: return "r2";
  }
  return "?";
}

std::string feature_name(uq::UType t, uq::Channel c, FeatureKind k) {
  return std::string(uq::utype_id(t)) + "_" + uq::channel_id(c) + "_" +
         feature_id(k);
}

double SeriesProfile::get(FeatureKind k) const {
  switch (k) {
    case FeatureKind::MuEarly: return mu_early;
    case FeatureKind::MuMid: return mu_mid;
    case FeatureKind::MuLate: return mu_late;
    case FeatureKind::Slope: return slope;
    case FeatureKind::R2: return r2;
  }
  return 0.0;
}

TraceProfile profile_trace(const ingest::TraceRecord& record, double log_base) {
  if (record.steps.size() < kMinTraceLength)
    throw TooShortError("trace has fewer than 4 steps");
  TraceProfile profile;
  for (const auto& series : uq::build_series(record, log_base)) {
    if (series.values.size() < kMinTraceLength) continue;
    const SegmentMeans m = segment_means(series.values);
    const Trend t = linear_trend(series.values);
    profile.entries[{series.utype, series.channel}] =
        SeriesProfile{m.mu_early, m.mu_mid, m.mu_late, t.slope, t.r2};
  }
  return profile;
}

TraceProfile prefix_profile(const ingest::TraceRecord& record,
                            size_t limit_tokens, double log_base) {
  if (limit_tokens < kMinTraceLength)
    throw ValidationError("prefix limit must be at least 4");
  if (limit_tokens >= record.steps.size())
    return profile_trace(record, log_base);
  ingest::TraceRecord prefix = record;
  prefix.steps.resize(limit_tokens);
  return profile_trace(prefix, log_base);
}

FeatureSelector FeatureSelector::full() {
  FeatureSelector s;
  s.id = "full";
  for (uq::UType t : uq::kAllTypes)
    for (uq::Channel c : uq::kAllChannels) s.series.emplace_back(t, c);
  s.kinds.assign(std::begin(kAllFeatures), std::end(kAllFeatures));
  return s;
}

FeatureSelector FeatureSelector::channel(uq::Channel c) {
  FeatureSelector s;
  s.id = uq::channel_id(c);
  for (uq::UType t : uq::kAllTypes) s.series.emplace_back(t, c);
  s.kinds.assign(std::begin(kAllFeatures), std::end(kAllFeatures));
  return s;
}

FeatureSelector FeatureSelector::single(uq::UType t, uq::Channel c) {
  FeatureSelector s;
  s.id = std::string(uq::utype_id(t)) + "_" + uq::channel_id(c);
  s.series.emplace_back(t, c);
  s.kinds.assign(std::begin(kAllFeatures), std::end(kAllFeatures));
  return s;
}

FeatureMatrix build_matrix(const std::vector<ingest::TraceRecord>& records,
                           const FeatureSelector& selector, double log_base,
                           std::optional<size_t> prefix_limit,
                           std::optional<double> prefix_fraction) {
  if (selector.series.empty() || selector.kinds.empty())
    throw ConfigError("empty feature selection");
  if (prefix_limit && prefix_fraction)
    throw ConfigError("prefix limit and fraction are mutually exclusive");

  FeatureMatrix m;
  for (const auto& [t, c] : selector.series)
    for (FeatureKind k : selector.kinds) m.names.push_back(feature_name(t, c, k));

  for (size_t i = 0; i < records.size(); ++i) {
    const ingest::TraceRecord& r = records[i];
    if (!r.is_correct)
      throw ValidationError("record '" + r.id + "' lacks a correctness label");

    std::optional<TraceProfile> profile;
    try {
      if (prefix_limit) {
        profile = prefix_profile(r, *prefix_limit, log_base);
      } else if (prefix_fraction) {
        const size_t eff = static_cast<size_t>(
            std::floor(*prefix_fraction * static_cast<double>(r.steps.size())));
        if (eff < kMinTraceLength) {
          ++m.dropped;
          continue;
        }
        profile = prefix_profile(r, eff, log_base);
      } else {
        profile = profile_trace(r, log_base);
      }
    } catch (const TooShortError&) {
      ++m.dropped;
      continue;
    }

    std::vector<double> row;
    row.reserve(m.names.size());
    bool complete = true;
    for (const auto& [t, c] : selector.series) {
      const auto it = profile->entries.find({t, c});
      if (it == profile->entries.end()) {
        complete = false;
        break;
      }
      for (FeatureKind k : selector.kinds) row.push_back(it->second.get(k));
    }
    if (!complete) {
      ++m.dropped;
      continue;
    }
    m.rows.push_back(std::move(row));
    m.labels.push_back(*r.is_correct ? 1 : 0);
    m.record_index.push_back(i);
  }

  if (m.rows.empty())
    throw ConfigError("no usable rows for selector '" + selector.id + "'");
  return m;
}

void write_matrix_csv(const std::string& path, const FeatureMatrix& matrix) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + path);
  out << "label";
  for (const auto& name : matrix.names) out << "," << name;
  out << "\n";
  for (size_t i = 0; i < matrix.rows.size(); ++i) {
    out << matrix.labels[i];
    for (double v : matrix.rows[i]) out << "," << fmt_double(v);
    out << "\n";
  }
}

}  // namespace uqtrace::features
