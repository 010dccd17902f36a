// SPDX-License-Identifier: Apache-2.0
//
// Batched loss/gradient kernels.
//
// Every kernel exists as a portable scalar reference and, on x86-64 builds,
// an AVX2+FMA variant.  The variant is chosen once at startup from the CPU
// features (override with MXQL_ISA=scalar|avx2, or set_isa()).  Variants
// agree to a few ulps; tests/kernels_equivalence_test.cpp pins the bound.
//
// Kernels do not validate their input: non-finite residuals propagate and
// an overflowing exponential yields +/-inf, which callers treat as a
// divergence signal.
#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "mxql/losses.hpp"

namespace mxql::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);

/// True when the variant was compiled in and the CPU can run it.
bool isa_supported(Isa isa);
/// Variant currently used by the dispatching entry points.
Isa active_isa();
/// Force a variant (throws ConfigError when unsupported).
void set_isa(Isa isa);

/// Raw per-ISA entry points.  Pointers are never null.
struct KernelTable {
  Isa isa;
  // out[i] = e^z - z - 1 or (1 - e^z)/beta with z = r[i] * inv_beta.
  void (*gumbel_loss)(const double* r, double* out, std::size_t n, double inv_beta);
  void (*gumbel_grad)(const double* r, double* out, std::size_t n, double inv_beta);
  // Truncated series of the given even order (order 2 is L2).
  void (*poly_loss)(const double* r, double* out, std::size_t n, double inv_beta, int order);
  void (*poly_grad)(const double* r, double* out, std::size_t n, double inv_beta, int order);
  void (*expectile_loss)(const double* r, double* out, std::size_t n, double tau);
  void (*expectile_grad)(const double* r, double* out, std::size_t n, double tau);
  // Batch-coupled: per-term values / per-sample d/dh with the shared max shift.
  void (*clipped_loss)(const double* r, double* out, std::size_t n, double inv_beta, double clip);
  void (*clipped_grad)(const double* r, double* out, std::size_t n, double inv_beta, double clip);
  double (*sum)(const double* x, std::size_t n);
  void (*exp)(const double* x, double* out, std::size_t n);
};

const KernelTable& table(Isa isa);
inline const KernelTable& table() { return table(active_isa()); }

/// out[i] = loss(residuals[i]).  For ClippedGumbel the batch is coupled
/// through the max shift and out[i] is the i-th term of the mean.
void loss_values(const LossSpec& spec, std::span<const double> residuals, std::span<double> out);
/// out[i] = d loss_i / dh.
void loss_grads(const LossSpec& spec, std::span<const double> residuals, std::span<double> out);

double sum(std::span<const double> x);

/// Mean loss and mean gradient over a batch; `finite` is false when any
/// term overflowed or was not a number.
struct BatchEval {
  double mean_loss;
  double mean_grad;
  bool finite;
};
BatchEval evaluate_batch(const LossSpec& spec, std::span<const double> residuals,
                         std::span<double> scratch);

/// Same with an explicit kernel table (used by equivalence tests).
void loss_values(const KernelTable& t, const LossSpec& spec, std::span<const double> residuals,
                 std::span<double> out);
void loss_grads(const KernelTable& t, const LossSpec& spec, std::span<const double> residuals,
                std::span<double> out);

}  // namespace mxql::kernels
