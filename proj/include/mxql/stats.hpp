// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

namespace mxql::stats {

struct SampleSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // unbiased (divisor n - 1)
};

/// Mean and unbiased standard deviation.  Throws InputError when n < 2.
SampleSummary summarize(std::span<const double> samples);

double mean(std::span<const double> samples);

enum class TTestKind { Welch, Student };

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
  /// Both samples have zero variance; t and p are the limiting values
  /// (t = 0, p = 1 for equal means, t = +/-inf, p = 0 otherwise).
  bool degenerate = false;
};

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);
TTestResult t_test(const SampleSummary& a, const SampleSummary& b, TTestKind kind = TTestKind::Welch);

/// I_x(a, b) by Lentz's continued fraction, using the symmetry
/// I_x(a,b) = 1 - I_{1-x}(b,a) where the fraction converges slowly.
double regularized_incomplete_beta(double x, double a, double b);

/// Two-sided p value of Student's t distribution.
double student_t_two_sided_p(double t, double df);

}  // namespace mxql::stats
