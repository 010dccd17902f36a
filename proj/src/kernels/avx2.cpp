// SPDX-License-Identifier: Apache-2.0
//
// AVX2 + FMA kernels, four doubles per lane group.  Compiled with
// -mavx2 -mfma and only entered after a runtime CPU check.
#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <limits>

#include "../detail/series.hpp"
#include "kernel_tables.hpp"

namespace mxql::kernels {
namespace {

constexpr std::size_t kLanes = 4;

inline __m256d splat(double v) { return _mm256_set1_pd(v); }

// Lane mask selecting the first `count` (< 4) lanes.
inline __m256i tail_mask(std::size_t count) {
  const __m256i idx = _mm256_setr_epi64x(0, 1, 2, 3);
  return _mm256_cmpgt_epi64(_mm256_set1_epi64x(static_cast<long long>(count)), idx);
}

// 2^k for integral k in [-1022, 1023] held as a double.
inline __m256d pow2(__m256d k) {
  const __m256d magic = splat(4503599627370496.0 + 1023.0);  // 2^52 + bias
  const __m256i bits = _mm256_castpd_si256(_mm256_add_pd(k, magic));
  return _mm256_castsi256_pd(_mm256_slli_epi64(bits, 52));
}

// e^x with Cody-Waite reduction x = n ln2 + r, |r| <= ln2/2, and a degree-13
// Taylor polynomial for e^r (truncation < 5e-18).  2^n is applied in two
// halves so that n = 1024 and gradual underflow are handled.
inline __m256d exp4(__m256d x) {
  const __m256d ln2_hi = splat(6.93147180369123816490e-01);
  const __m256d ln2_lo = splat(1.90821492927058770002e-10);
  const __m256d log2e = splat(1.44269504088896338700e+00);
  // max/min return the second operand on NaN, keeping NaN inputs intact.
  const __m256d xc = _mm256_min_pd(splat(710.0), _mm256_max_pd(splat(-746.0), x));
  const __m256d n =
      _mm256_round_pd(_mm256_mul_pd(xc, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, xc);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  const auto& c = reciprocal_factorials();
  __m256d p = splat(c[13]);
  for (int k = 12; k >= 0; --k) p = _mm256_fmadd_pd(p, r, splat(c[k]));

  const __m256d n1 = _mm256_floor_pd(_mm256_mul_pd(n, splat(0.5)));
  const __m256d n2 = _mm256_sub_pd(n, n1);
  __m256d y = _mm256_mul_pd(_mm256_mul_pd(p, pow2(n1)), pow2(n2));

  const __m256d over = _mm256_cmp_pd(x, splat(709.782712893384), _CMP_GT_OQ);
  const __m256d under = _mm256_cmp_pd(x, splat(-745.1332191019412), _CMP_LT_OQ);
  y = _mm256_blendv_pd(y, splat(std::numeric_limits<double>::infinity()), over);
  y = _mm256_blendv_pd(y, _mm256_setzero_pd(), under);
  return y;
}

// sum_{j=2}^{order} z^j/j!
inline __m256d poly_tail(__m256d z, int order) {
  const auto& c = reciprocal_factorials();
  __m256d acc = splat(c[order]);
  for (int j = order - 1; j >= 2; --j) acc = _mm256_fmadd_pd(acc, z, splat(c[j]));
  return _mm256_mul_pd(_mm256_mul_pd(acc, z), z);
}

// sum_{k=1}^{order-1} z^k/k!
inline __m256d poly_expm1(__m256d z, int order) {
  const auto& c = reciprocal_factorials();
  __m256d acc = splat(c[order - 1]);
  for (int k = order - 2; k >= 1; --k) acc = _mm256_fmadd_pd(acc, z, splat(c[k]));
  return _mm256_mul_pd(acc, z);
}

inline __m256d abs4(__m256d v) { return _mm256_andnot_pd(splat(-0.0), v); }

// Applies `body` to groups of four, using masked loads/stores for the tail.
template <class Body>
inline void for_each_group(const double* in, double* out, std::size_t n, Body body) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) _mm256_storeu_pd(out + i, body(_mm256_loadu_pd(in + i)));
  if (i < n) {
    const __m256i mask = tail_mask(n - i);
    _mm256_maskstore_pd(out + i, mask, body(_mm256_maskload_pd(in + i, mask)));
  }
}

void gumbel_loss(const double* r, double* out, std::size_t n, double inv_beta) {
  const __m256d ib = splat(inv_beta);
  for_each_group(r, out, n, [&](__m256d v) {
    const __m256d z = _mm256_mul_pd(v, ib);
    const __m256d small = _mm256_cmp_pd(abs4(z), splat(detail::kSeriesCutoff), _CMP_LT_OQ);
    const __m256d series = poly_tail(z, detail::kSeriesOrder);
    const __m256d big = _mm256_sub_pd(_mm256_sub_pd(exp4(z), splat(1.0)), z);
    return _mm256_blendv_pd(big, series, small);
  });
}

void gumbel_grad(const double* r, double* out, std::size_t n, double inv_beta) {
  const __m256d ib = splat(inv_beta);
  const __m256d neg_ib = splat(-inv_beta);
  for_each_group(r, out, n, [&](__m256d v) {
    const __m256d z = _mm256_mul_pd(v, ib);
    const __m256d small = _mm256_cmp_pd(abs4(z), splat(detail::kSeriesCutoff), _CMP_LT_OQ);
    const __m256d series = poly_expm1(z, detail::kSeriesOrder);
    const __m256d big = _mm256_sub_pd(exp4(z), splat(1.0));
    return _mm256_mul_pd(_mm256_blendv_pd(big, series, small), neg_ib);
  });
}

void poly_loss(const double* r, double* out, std::size_t n, double inv_beta, int order) {
  const __m256d ib = splat(inv_beta);
  for_each_group(r, out, n, [&](__m256d v) { return poly_tail(_mm256_mul_pd(v, ib), order); });
}

void poly_grad(const double* r, double* out, std::size_t n, double inv_beta, int order) {
  const __m256d ib = splat(inv_beta);
  const __m256d neg_ib = splat(-inv_beta);
  for_each_group(r, out, n, [&](__m256d v) {
    return _mm256_mul_pd(poly_expm1(_mm256_mul_pd(v, ib), order), neg_ib);
  });
}

inline __m256d expectile_weight(__m256d v, double tau) {
  const __m256d neg = _mm256_cmp_pd(v, _mm256_setzero_pd(), _CMP_LT_OQ);
  return _mm256_blendv_pd(splat(tau), splat(1.0 - tau), neg);
}

void expectile_loss(const double* r, double* out, std::size_t n, double tau) {
  for_each_group(r, out, n, [&](__m256d v) {
    return _mm256_mul_pd(_mm256_mul_pd(expectile_weight(v, tau), v), v);
  });
}

void expectile_grad(const double* r, double* out, std::size_t n, double tau) {
  for_each_group(r, out, n, [&](__m256d v) {
    return _mm256_mul_pd(_mm256_mul_pd(expectile_weight(v, tau), v), splat(-2.0));
  });
}

inline __m256d clamp4(__m256d z, double clip) {
  return _mm256_min_pd(_mm256_max_pd(z, splat(-clip)), splat(clip));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d m = _mm_max_pd(lo, hi);
  return std::max(_mm_cvtsd_f64(m), _mm_cvtsd_f64(_mm_unpackhi_pd(m, m)));
}

double clipped_shift(const double* r, std::size_t n, double inv_beta, double clip) {
  const __m256d ib = splat(inv_beta);
  const __m256d neg_inf = splat(-std::numeric_limits<double>::infinity());
  __m256d m = neg_inf;
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    m = _mm256_max_pd(m, clamp4(_mm256_mul_pd(_mm256_loadu_pd(r + i), ib), clip));
  if (i < n) {
    const __m256i mask = tail_mask(n - i);
    const __m256d z = clamp4(_mm256_mul_pd(_mm256_maskload_pd(r + i, mask), ib), clip);
    m = _mm256_max_pd(m, _mm256_blendv_pd(neg_inf, z, _mm256_castsi256_pd(mask)));
  }
  const double out = hmax(m);
  return out < -1.0 ? -1.0 : out;
}

void clipped_loss(const double* r, double* out, std::size_t n, double inv_beta, double clip) {
  const double m = clipped_shift(r, n, inv_beta, clip);
  const __m256d ib = splat(inv_beta);
  const __m256d mv = splat(m);
  const __m256d e_neg_m = splat(std::exp(-m));
  for_each_group(r, out, n, [&](__m256d v) {
    const __m256d z = clamp4(_mm256_mul_pd(v, ib), clip);
    const __m256d e = exp4(_mm256_sub_pd(z, mv));
    return _mm256_sub_pd(_mm256_fnmadd_pd(z, e_neg_m, e), e_neg_m);
  });
}

void clipped_grad(const double* r, double* out, std::size_t n, double inv_beta, double clip) {
  const double m = clipped_shift(r, n, inv_beta, clip);
  const __m256d ib = splat(inv_beta);
  const __m256d neg_ib = splat(-inv_beta);
  const __m256d mv = splat(m);
  const __m256d e_neg_m = splat(std::exp(-m));
  for_each_group(r, out, n, [&](__m256d v) {
    const __m256d z = _mm256_mul_pd(v, ib);
    const __m256d outside = _mm256_or_pd(_mm256_cmp_pd(z, splat(-clip), _CMP_LT_OQ),
                                         _mm256_cmp_pd(z, splat(clip), _CMP_GT_OQ));
    const __m256d g = _mm256_mul_pd(_mm256_sub_pd(exp4(_mm256_sub_pd(z, mv)), e_neg_m), neg_ib);
    return _mm256_blendv_pd(g, _mm256_setzero_pd(), outside);
  });
}

double sum(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + kLanes));
  }
  for (; i + kLanes <= n; i += kLanes) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
  if (i < n) acc1 = _mm256_add_pd(acc1, _mm256_maskload_pd(x + i, tail_mask(n - i)));
  const __m256d acc = _mm256_add_pd(acc0, acc1);
  const __m128d pair = _mm_add_pd(_mm256_castpd256_pd128(acc), _mm256_extractf128_pd(acc, 1));
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

void exp_kernel(const double* x, double* out, std::size_t n) {
  for_each_group(x, out, n, [](__m256d v) { return exp4(v); });
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable t{Isa::Avx2,     gumbel_loss,  gumbel_grad,  poly_loss,
                             poly_grad,     expectile_loss, expectile_grad, clipped_loss,
                             clipped_grad,  sum,          exp_kernel};
  return t;
}

}  // namespace mxql::kernels
