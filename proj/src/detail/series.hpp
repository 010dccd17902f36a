// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mxql/losses.hpp"

namespace mxql::detail {

// Below this |z| the Gumbel loss and expm1 are summed as series.
inline constexpr double kSeriesCutoff = 0.5;
inline constexpr int kSeriesOrder = 20;

// sum_{j=2}^{order} z^j / j!, Horner form z^2 (1/2! + z (1/3! + ...)).
inline double truncated_tail(double z, int order) {
  const auto& c = reciprocal_factorials();
  double acc = c[order];
  for (int j = order - 1; j >= 2; --j) acc = acc * z + c[j];
  return acc * z * z;
}

// sum_{k=1}^{order-1} z^k / k!.
inline double truncated_expm1(double z, int order) {
  const auto& c = reciprocal_factorials();
  double acc = c[order - 1];
  for (int k = order - 2; k >= 1; --k) acc = acc * z + c[k];
  return acc * z;
}

}  // namespace mxql::detail
