// SPDX-License-Identifier: Apache-2.0
#include "mxql/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "detail/series.hpp"
#include "mxql/error.hpp"

namespace mxql {
namespace {

using detail::kSeriesCutoff;
using detail::kSeriesOrder;
using detail::truncated_expm1;
using detail::truncated_tail;

constexpr std::array<double, kMaxOrder + 1> make_reciprocal_factorials() {
  std::array<double, kMaxOrder + 1> out{};
  out[0] = 1.0;
  for (int j = 1; j <= kMaxOrder; ++j) out[j] = out[j - 1] / static_cast<double>(j);
  return out;
}

constexpr auto kReciprocalFactorials = make_reciprocal_factorials();

void require_finite(double residual) {
  if (!std::isfinite(residual)) throw InputError("residual must be finite");
}

void require_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive and finite");
}

void require_order(int order) {
  if (order < 2 || order % 2 != 0) throw ConfigError("order must be even and >= 2");
  if (order > kMaxOrder) throw ConfigError("order must not exceed " + std::to_string(kMaxOrder));
}

void require_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
}

}  // namespace

const std::array<double, kMaxOrder + 1>& reciprocal_factorials() { return kReciprocalFactorials; }

// ---------------------------------------------------------------------------
// LossSpec

LossSpec LossSpec::gumbel(double beta) {
  require_beta(beta);
  LossSpec s;
  s.variant_ = LossVariant::Gumbel;
  s.beta_ = beta;
  return s;
}

LossSpec LossSpec::clipped_gumbel(double beta, double clip) {
  require_beta(beta);
  if (!(clip > 0.0)) throw ConfigError("clip must be positive");
  LossSpec s;
  s.variant_ = LossVariant::ClippedGumbel;
  s.beta_ = beta;
  s.clip_ = clip;
  return s;
}

LossSpec LossSpec::expanded(double beta, int order) {
  require_beta(beta);
  require_order(order);
  LossSpec s;
  s.variant_ = LossVariant::ExpandedGumbel;
  s.beta_ = beta;
  s.order_ = order;
  return s;
}

LossSpec LossSpec::l2(double beta) {
  require_beta(beta);
  LossSpec s;
  s.variant_ = LossVariant::L2;
  s.beta_ = beta;
  s.order_ = 2;
  return s;
}

LossSpec LossSpec::expectile(double tau) {
  require_tau(tau);
  LossSpec s;
  s.variant_ = LossVariant::Expectile;
  s.tau_ = tau;
  return s;
}

LossSpec LossSpec::with_beta(double beta) const {
  switch (variant_) {
    case LossVariant::Gumbel: return gumbel(beta);
    case LossVariant::ClippedGumbel: return clipped_gumbel(beta, clip_);
    case LossVariant::ExpandedGumbel: return expanded(beta, order_);
    case LossVariant::L2: return l2(beta);
    case LossVariant::Expectile: return *this;
  }
  return *this;
}

std::string_view LossSpec::name() const {
  switch (variant_) {
    case LossVariant::Gumbel: return "gumbel";
    case LossVariant::ClippedGumbel: return "clipped";
    case LossVariant::ExpandedGumbel: return "expanded";
    case LossVariant::L2: return "l2";
    case LossVariant::Expectile: return "expectile";
  }
  return "unknown";
}

std::string LossSpec::label() const {
  switch (variant_) {
    case LossVariant::ExpandedGumbel: return "expanded_n" + std::to_string(order_);
    default: return std::string(name());
  }
}

LossVariant parse_loss_variant(std::string_view name) {
  if (name == "gumbel") return LossVariant::Gumbel;
  if (name == "clipped" || name == "clipped_gumbel") return LossVariant::ClippedGumbel;
  if (name == "expanded" || name == "expanded_gumbel") return LossVariant::ExpandedGumbel;
  if (name == "l2") return LossVariant::L2;
  if (name == "expectile") return LossVariant::Expectile;
  throw ConfigError("unknown loss '" + std::string(name) +
                    "' (expected gumbel, clipped, expanded, l2 or expectile)");
}

// ---------------------------------------------------------------------------
// Per-sample losses

double gumbel_loss(double residual, double beta) {
  require_finite(residual);
  require_beta(beta);
  const double z = residual / beta;
  if (std::abs(z) < kSeriesCutoff) return truncated_tail(z, kSeriesOrder);
  const double em1 = std::expm1(z);
  if (std::isinf(em1)) return std::numeric_limits<double>::infinity();
  return em1 - z;
}

double gumbel_loss_grad(double residual, double beta) {
  require_finite(residual);
  require_beta(beta);
  return -std::expm1(residual / beta) / beta;
}

double clipped_gumbel_loss(std::span<const double> residuals, double beta, double clip) {
  require_beta(beta);
  if (!(clip > 0.0)) throw ConfigError("clip must be positive");
  if (residuals.empty()) throw InputError("clipped_gumbel_loss needs a nonempty batch");
  std::vector<double> z(residuals.size());
  double max_z = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    require_finite(residuals[i]);
    z[i] = std::clamp(residuals[i] / beta, -clip, clip);
    max_z = std::max(max_z, z[i]);
  }
  if (max_z < -1.0) max_z = -1.0;
  const double e_neg_m = std::exp(-max_z);
  double sum = 0.0;
  for (double zi : z) sum += std::exp(zi - max_z) - zi * e_neg_m - e_neg_m;
  return sum / static_cast<double>(z.size());
}

std::vector<double> clipped_gumbel_loss_grads(std::span<const double> residuals, double beta,
                                              double clip) {
  require_beta(beta);
  if (!(clip > 0.0)) throw ConfigError("clip must be positive");
  if (residuals.empty()) throw InputError("clipped_gumbel_loss needs a nonempty batch");
  std::vector<double> out(residuals.size());
  double max_z = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    require_finite(residuals[i]);
    max_z = std::max(max_z, std::clamp(residuals[i] / beta, -clip, clip));
  }
  if (max_z < -1.0) max_z = -1.0;
  const double e_neg_m = std::exp(-max_z);
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const double raw = residuals[i] / beta;
    // clamp passes gradient only inside [-clip, clip]
    out[i] = (raw < -clip || raw > clip) ? 0.0 : -(std::exp(raw - max_z) - e_neg_m) / beta;
  }
  return out;
}

double expanded_gumbel_loss(double residual, double beta, int order) {
  require_finite(residual);
  require_beta(beta);
  require_order(order);
  return truncated_tail(residual / beta, order);
}

double expanded_gumbel_loss_grad(double residual, double beta, int order) {
  require_finite(residual);
  require_beta(beta);
  require_order(order);
  return -truncated_expm1(residual / beta, order) / beta;
}

double expectile_loss(double residual, double tau) {
  require_finite(residual);
  require_tau(tau);
  const double weight = residual < 0.0 ? 1.0 - tau : tau;
  return weight * residual * residual;
}

double expectile_loss_grad(double residual, double tau) {
  require_finite(residual);
  require_tau(tau);
  const double weight = residual < 0.0 ? 1.0 - tau : tau;
  return -2.0 * weight * residual;
}

double loss_value(const LossSpec& spec, double residual) {
  switch (spec.variant()) {
    case LossVariant::Gumbel: return gumbel_loss(residual, spec.beta());
    case LossVariant::ClippedGumbel:
      return clipped_gumbel_loss(std::span<const double>(&residual, 1), spec.beta(), spec.clip());
    case LossVariant::ExpandedGumbel:
    case LossVariant::L2: return expanded_gumbel_loss(residual, spec.beta(), spec.order());
    case LossVariant::Expectile: return expectile_loss(residual, spec.tau());
  }
  return 0.0;
}

double loss_grad(const LossSpec& spec, double residual) {
  switch (spec.variant()) {
    case LossVariant::Gumbel: return gumbel_loss_grad(residual, spec.beta());
    case LossVariant::ClippedGumbel:
      return clipped_gumbel_loss_grads(std::span<const double>(&residual, 1), spec.beta(),
                                       spec.clip())[0];
    case LossVariant::ExpandedGumbel:
    case LossVariant::L2: return expanded_gumbel_loss_grad(residual, spec.beta(), spec.order());
    case LossVariant::Expectile: return expectile_loss_grad(residual, spec.tau());
  }
  return 0.0;
}

std::vector<CurvePoint> loss_curve(const LossSpec& spec, std::span<const double> residuals) {
  std::vector<CurvePoint> out;
  out.reserve(residuals.size());
  for (double r : residuals) out.push_back({r, loss_value(spec, r)});
  return out;
}

}  // namespace mxql
