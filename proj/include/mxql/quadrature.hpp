// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>

namespace mxql {

struct SimpsonOptions {
  double abs_tol = 1e-8;
  int max_depth = 40;
  /// The interval is first cut into this many equal panels so that narrow
  /// peaks on a wide domain are not missed by the first three samples.
  int initial_panels = 64;
};

namespace detail {

template <class F>
double simpson_recurse(const F& f, double a, double b, double fa, double fm, double fb,
                       double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] with interval bisection
/// and Richardson correction.  The tolerance is split evenly across the
/// initial panels.
template <class F>
double adaptive_simpson(const F& f, double a, double b, const SimpsonOptions& opt = {}) {
  if (a == b) return 0.0;
  const int panels = opt.initial_panels > 0 ? opt.initial_panels : 1;
  const double width = (b - a) / panels;
  const double tol = opt.abs_tol / panels;
  double total = 0.0;
  double fa = f(a);
  for (int i = 0; i < panels; ++i) {
    const double lo = a + width * i;
    const double hi = (i + 1 == panels) ? b : a + width * (i + 1);
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    const double fb = f(hi);
    const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    total += detail::simpson_recurse(f, lo, hi, fa, fm, fb, whole, tol, opt.max_depth);
    fa = fb;
  }
  return total;
}

}  // namespace mxql
