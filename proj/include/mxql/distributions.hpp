// SPDX-License-Identifier: Apache-2.0
//
// Gumbel sampling and densities, and the error densities implied by a loss
// through p(x) = exp(-loss(x)) / Z.
#pragma once

#include <span>
#include <vector>

#include "mxql/grid.hpp"
#include "mxql/losses.hpp"
#include "mxql/quadrature.hpp"
#include "mxql/rng.hpp"

namespace mxql {

inline constexpr double kEulerGamma = 0.57721566490153286061;

/// Gumbel(location, scale), or its reflection about `location` when
/// `negated` is set (the -G(0, beta) noise model used for regression data).
struct GumbelParams {
  double location = 0.0;
  double scale = 1.0;
  bool negated = false;

  void validate() const;
  double mean() const;
};

/// Inverse CDF: location - scale * ln(-ln u), reflected when negated.
double gumbel_from_uniform(double u, const GumbelParams& params);
double sample_gumbel(const GumbelParams& params, Rng& rng);
double gumbel_pdf(double x, const GumbelParams& params);

struct DensityCurve {
  std::vector<double> grid;     // raw residuals x - h, ascending
  std::vector<double> density;  // exp(-loss(x)) / normalizer
  double normalizer = 1.0;

  /// Trapezoid rule over the stored points.
  double integral() const;
};

struct DensityOptions {
  /// exp(-loss) at both grid ends must fall below this (the peak is 1).
  double tail_threshold = 1e-12;
  SimpsonOptions quadrature{};
};

/// Normalized implied error density of `spec` over the residual grid.
/// Throws SupportError when the grid ends carry non-negligible mass.
DensityCurve implied_error_density(const LossSpec& spec, const Grid& grid,
                                   const DensityOptions& opt = {});

double trapezoid(std::span<const double> x, std::span<const double> y);

}  // namespace mxql
