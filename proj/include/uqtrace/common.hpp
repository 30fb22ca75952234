// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>

namespace uqtrace {

// Thrown on any domain/range violation of an operation's inputs.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input series shorter than the minimum a feature needs.
struct TooShortError : ValidationError {
  using ValidationError::ValidationError;
};

// Bad run configuration (empty selector, unusable cohort, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Marker base for natural-log entropy units.
inline constexpr double kNaturalBase = 2.718281828459045235;

// Locale-independent shortest round-trip formatting. All emitted
// artifacts (JSONL, CSV, SVG) go through this so byte-identical
// reruns do not depend on the global locale.
inline std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string fmt_fixed(double v, int precision) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v,
                           std::chars_format::fixed, precision);
  return std::string(buf, res.ptr);
}

}  // namespace uqtrace
