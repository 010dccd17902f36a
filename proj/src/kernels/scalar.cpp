// SPDX-License-Identifier: Apache-2.0
//
// Portable reference kernels.  The AVX2 variants are tested against these.
#include <algorithm>
#include <cmath>
#include <limits>

#include "../detail/series.hpp"
#include "kernel_tables.hpp"

namespace mxql::kernels {
namespace {

using detail::kSeriesCutoff;
using detail::kSeriesOrder;
using detail::truncated_expm1;
using detail::truncated_tail;

void gumbel_loss(const double* r, double* out, std::size_t n, double inv_beta) {
  for (std::size_t i = 0; i < n; ++i) {
    const double z = r[i] * inv_beta;
    out[i] = std::abs(z) < kSeriesCutoff ? truncated_tail(z, kSeriesOrder) : std::expm1(z) - z;
  }
}

void gumbel_grad(const double* r, double* out, std::size_t n, double inv_beta) {
  for (std::size_t i = 0; i < n; ++i) out[i] = -std::expm1(r[i] * inv_beta) * inv_beta;
}

void poly_loss(const double* r, double* out, std::size_t n, double inv_beta, int order) {
  for (std::size_t i = 0; i < n; ++i) out[i] = truncated_tail(r[i] * inv_beta, order);
}

void poly_grad(const double* r, double* out, std::size_t n, double inv_beta, int order) {
  for (std::size_t i = 0; i < n; ++i) out[i] = -truncated_expm1(r[i] * inv_beta, order) * inv_beta;
}

void expectile_loss(const double* r, double* out, std::size_t n, double tau) {
  for (std::size_t i = 0; i < n; ++i) {
    const double w = r[i] < 0.0 ? 1.0 - tau : tau;
    out[i] = w * r[i] * r[i];
  }
}

void expectile_grad(const double* r, double* out, std::size_t n, double tau) {
  for (std::size_t i = 0; i < n; ++i) {
    const double w = r[i] < 0.0 ? 1.0 - tau : tau;
    out[i] = -2.0 * w * r[i];
  }
}

double clipped_shift(const double* r, std::size_t n, double inv_beta, double clip) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::clamp(r[i] * inv_beta, -clip, clip));
  return m < -1.0 ? -1.0 : m;
}

void clipped_loss(const double* r, double* out, std::size_t n, double inv_beta, double clip) {
  const double m = clipped_shift(r, n, inv_beta, clip);
  const double e_neg_m = std::exp(-m);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = std::clamp(r[i] * inv_beta, -clip, clip);
    out[i] = std::exp(z - m) - z * e_neg_m - e_neg_m;
  }
}

void clipped_grad(const double* r, double* out, std::size_t n, double inv_beta, double clip) {
  const double m = clipped_shift(r, n, inv_beta, clip);
  const double e_neg_m = std::exp(-m);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = r[i] * inv_beta;
    out[i] = (z < -clip || z > clip) ? 0.0 : -(std::exp(z - m) - e_neg_m) * inv_beta;
  }
}

double sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

void exp_kernel(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{Isa::Scalar, gumbel_loss,  gumbel_grad,  poly_loss, poly_grad,
                             expectile_loss, expectile_grad, clipped_loss, clipped_grad, sum,
                             exp_kernel};
  return t;
}

}  // namespace mxql::kernels
