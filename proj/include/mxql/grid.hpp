// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace mxql {

/// Evenly spaced points lo, lo + step, ..., up to hi (inclusive within
/// rounding).  Points are computed as lo + i*step, never by accumulation.
struct Grid {
  double lo = 0.0;
  double hi = 0.0;
  double step = 1.0;

  /// Throws ConfigError when the grid is empty or not finite.
  void validate() const;
  std::size_t size() const;
  double at(std::size_t i) const { return lo + static_cast<double>(i) * step; }
  std::vector<double> points() const;
};

/// Parses "lo:hi:step".
Grid parse_grid(std::string_view text);

std::vector<double> parse_double_list(std::string_view text);
std::vector<int> parse_int_list(std::string_view text);

}  // namespace mxql
