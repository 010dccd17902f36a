// SPDX-License-Identifier: Apache-2.0
#include "mxql/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mxql/error.hpp"

namespace mxql::stats {
namespace {

// Continued fraction for I_x(a,b), modified Lentz.
double beta_continued_fraction(double x, double a, double b) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double mean(std::span<const double> samples) {
  if (samples.empty()) throw InputError("mean of an empty sample");
  double s = 0.0;
  for (double v : samples) s += v;
  return s / static_cast<double>(samples.size());
}

SampleSummary summarize(std::span<const double> samples) {
  if (samples.size() < 2) throw InputError("standard deviation needs at least two samples");
  SampleSummary out;
  out.n = samples.size();
  out.mean = mean(samples);
  double ss = 0.0;
  for (double v : samples) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(out.n - 1));
  return out;
}

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw InputError("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw InputError("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(x, a, b) / a;
  return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw InputError("t distribution needs df > 0");
  if (std::isinf(t)) return 0.0;
  const double p = regularized_incomplete_beta(df / (df + t * t), 0.5 * df, 0.5);
  return std::clamp(p, 0.0, 1.0);
}

TTestResult t_test(const SampleSummary& a, const SampleSummary& b, TTestKind kind) {
  if (a.n < 2 || b.n < 2) throw InputError("t-test needs at least two samples per group");
  const double na = static_cast<double>(a.n);
  const double nb = static_cast<double>(b.n);
  const double va = a.std * a.std;
  const double vb = b.std * b.std;
  const double diff = a.mean - b.mean;

  TTestResult r;
  double se2 = 0.0;
  if (kind == TTestKind::Welch) {
    const double qa = va / na;
    const double qb = vb / nb;
    se2 = qa + qb;
    r.df = se2 > 0.0 ? se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0)) : na + nb - 2.0;
  } else {
    const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
    se2 = pooled * (1.0 / na + 1.0 / nb);
    r.df = na + nb - 2.0;
  }

  if (!(se2 > 0.0)) {
    r.degenerate = true;
    if (diff == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), diff);
      r.p = 0.0;
    }
    return r;
  }
  r.t = diff / std::sqrt(se2);
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  return t_test(summarize(a), summarize(b), TTestKind::Welch);
}

}  // namespace mxql::stats
