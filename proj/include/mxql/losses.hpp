// SPDX-License-Identifier: Apache-2.0
//
// Loss families used for value regression and their derivatives.
//
// Residual convention throughout the library: residual = sample - prediction
// (x - h, or Q(s,a) - V(s)).  Gradients are taken with respect to the
// prediction h, so a positive residual yields a negative gradient.
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mxql {

enum class LossVariant { Gumbel, ClippedGumbel, ExpandedGumbel, L2, Expectile };

/// Largest expansion order accepted (1/171! underflows double precision).
inline constexpr int kMaxOrder = 170;

/// Tagged description of a loss family and its parameters.
///
/// Instances are only created through the named factories, which validate
/// the parameters, so a LossSpec in hand is always well formed.
class LossSpec {
 public:
  static LossSpec gumbel(double beta);
  static LossSpec clipped_gumbel(double beta, double clip);
  static LossSpec expanded(double beta, int order);
  /// (residual/beta)^2 / 2; identical to expanded(beta, 2).
  static LossSpec l2(double beta = 1.0);
  static LossSpec expectile(double tau);

  LossVariant variant() const { return variant_; }
  double beta() const { return beta_; }
  /// Expansion order n (2 for L2, 0 when not applicable).
  int order() const { return order_; }
  double clip() const { return clip_; }
  double tau() const { return tau_; }

  /// Short machine name: gumbel, clipped, expanded, l2, expectile.
  std::string_view name() const;
  /// Human label used in CSV output, e.g. "expanded_n8".
  std::string label() const;

  /// Same family with a different temperature (expectile is unaffected).
  LossSpec with_beta(double beta) const;

  friend bool operator==(const LossSpec&, const LossSpec&) = default;

 private:
  LossSpec() = default;

  LossVariant variant_ = LossVariant::Gumbel;
  double beta_ = 1.0;
  int order_ = 0;
  double clip_ = 0.0;
  double tau_ = 0.5;
};

LossVariant parse_loss_variant(std::string_view name);

/// 1/j! for j = 0..kMaxOrder.
const std::array<double, kMaxOrder + 1>& reciprocal_factorials();

/// e^z - z - 1 with z = residual/beta.  Returns +inf when e^z overflows.
double gumbel_loss(double residual, double beta);

/// d/dh of gumbel_loss: (1 - e^z)/beta.  Returns -inf when e^z overflows.
double gumbel_loss_grad(double residual, double beta);

/// Mean of the max-normalized, clipped Gumbel loss over a batch.
///
/// z_i = clamp(r_i/beta, -clip, clip), m = max(max_i z_i, -1),
/// loss = mean_i [e^{z_i - m} - z_i e^{-m} - e^{-m}].
double clipped_gumbel_loss(std::span<const double> residuals, double beta, double clip);

/// Per-sample d/dh of the clipped loss terms, treating m as a constant.
/// Samples whose z is clamped contribute zero.  The gradient of the batch
/// mean is the mean of the returned values.
std::vector<double> clipped_gumbel_loss_grads(std::span<const double> residuals, double beta,
                                              double clip);

/// sum_{j=2}^{order} z^j / j!  (Maclaurin truncation of the Gumbel loss).
double expanded_gumbel_loss(double residual, double beta, int order);

/// d/dh of expanded_gumbel_loss: -(1/beta) sum_{k=1}^{order-1} z^k / k!.
double expanded_gumbel_loss_grad(double residual, double beta, int order);

/// |tau - 1[residual < 0]| * residual^2.
double expectile_loss(double residual, double tau);
double expectile_loss_grad(double residual, double tau);

/// Per-sample loss for any variant.  ClippedGumbel is evaluated as a
/// batch of one.
double loss_value(const LossSpec& spec, double residual);
/// Per-sample d/dh for any variant (ClippedGumbel as a batch of one).
double loss_grad(const LossSpec& spec, double residual);

struct CurvePoint {
  double residual;
  double loss;
};

/// Pointwise evaluation of a loss over a set of residuals.
std::vector<CurvePoint> loss_curve(const LossSpec& spec, std::span<const double> residuals);

}  // namespace mxql
