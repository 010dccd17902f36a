// SPDX-License-Identifier: Apache-2.0
#include "mxql/distributions.hpp"

#include <cmath>
#include <sstream>

#include "mxql/error.hpp"
#include "mxql/kernels.hpp"

namespace mxql {

void GumbelParams::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("Gumbel scale must be positive");
  if (!std::isfinite(location)) throw ConfigError("Gumbel location must be finite");
}

double GumbelParams::mean() const {
  return location + (negated ? -1.0 : 1.0) * kEulerGamma * scale;
}

double gumbel_from_uniform(double u, const GumbelParams& params) {
  params.validate();
  const double centered = -params.scale * std::log(-std::log(u));
  return params.location + (params.negated ? -centered : centered);
}

double sample_gumbel(const GumbelParams& params, Rng& rng) {
  return gumbel_from_uniform(rng.uniform_open(), params);
}

double gumbel_pdf(double x, const GumbelParams& params) {
  params.validate();
  double w = (x - params.location) / params.scale;
  if (params.negated) w = -w;
  return std::exp(-(w + std::exp(-w))) / params.scale;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("trapezoid: size mismatch");
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

double DensityCurve::integral() const { return trapezoid(grid, density); }

DensityCurve implied_error_density(const LossSpec& spec, const Grid& grid,
                                   const DensityOptions& opt) {
  DensityCurve curve;
  curve.grid = grid.points();
  if (curve.grid.size() < 3) throw ConfigError("density grid needs at least three points");

  const double lo = curve.grid.front();
  const double hi = curve.grid.back();
  const auto unnormalized = [&](double x) { return std::exp(-loss_value(spec, x)); };
  for (double end : {lo, hi}) {
    const double tail = unnormalized(end);
    if (!(tail < opt.tail_threshold)) {
      std::ostringstream msg;
      msg << "support not covered: exp(-loss) = " << tail << " at x = " << end << " for "
          << spec.label() << " (widen the grid)";
      throw SupportError(msg.str());
    }
  }

  curve.normalizer = adaptive_simpson(unnormalized, lo, hi, opt.quadrature);
  if (!(curve.normalizer > 0.0) || !std::isfinite(curve.normalizer))
    throw SupportError("implied density has no mass on the grid");

  curve.density.resize(curve.grid.size());
  if (spec.variant() == LossVariant::ClippedGumbel) {
    // each point is its own batch; the kernel would couple them
    for (std::size_t i = 0; i < curve.grid.size(); ++i) curve.density[i] = loss_value(spec, curve.grid[i]);
  } else {
    kernels::loss_values(spec, curve.grid, curve.density);
  }
  for (double& d : curve.density) d = -d;
  kernels::table().exp(curve.density.data(), curve.density.data(), curve.density.size());
  const double inv_z = 1.0 / curve.normalizer;
  for (double& d : curve.density) d *= inv_z;
  return curve;
}

}  // namespace mxql
