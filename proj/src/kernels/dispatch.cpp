// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#include "kernel_tables.hpp"
#include "mxql/error.hpp"

namespace mxql::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(MXQL_HAVE_AVX2)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("MXQL_ISA")) {
    const Isa wanted = parse_isa(env);
    if (!isa_supported(wanted)) throw ConfigError(std::string("MXQL_ISA=") + env + " is not supported here");
    return wanted;
  }
  return isa_supported(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

void check_sizes(std::span<const double> in, std::span<double> out) {
  if (out.size() < in.size()) throw InputError("kernel output span is shorter than its input");
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::Scalar;
  if (name == "avx2") return Isa::Avx2;
  throw ConfigError("unknown instruction set '" + std::string(name) + "' (expected scalar or avx2)");
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2: {
      static const bool ok = cpu_has_avx2();
      return ok;
    }
  }
  return false;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!isa_supported(isa)) throw ConfigError("instruction set " + std::string(isa_name(isa)) + " is not supported");
  current().store(isa, std::memory_order_relaxed);
}

const KernelTable& table(Isa isa) {
#if defined(MXQL_HAVE_AVX2)
  if (isa == Isa::Avx2) {
    if (!isa_supported(Isa::Avx2)) throw ConfigError("avx2 kernels requested on a CPU without AVX2/FMA");
    return avx2_table();
  }
#endif
  if (isa != Isa::Scalar) throw ConfigError("instruction set " + std::string(isa_name(isa)) + " not compiled in");
  return scalar_table();
}

void loss_values(const KernelTable& t, const LossSpec& spec, std::span<const double> residuals,
                 std::span<double> out) {
  check_sizes(residuals, out);
  const std::size_t n = residuals.size();
  const double* r = residuals.data();
  switch (spec.variant()) {
    case LossVariant::Gumbel: t.gumbel_loss(r, out.data(), n, 1.0 / spec.beta()); break;
    case LossVariant::ExpandedGumbel:
    case LossVariant::L2: t.poly_loss(r, out.data(), n, 1.0 / spec.beta(), spec.order()); break;
    case LossVariant::Expectile: t.expectile_loss(r, out.data(), n, spec.tau()); break;
    case LossVariant::ClippedGumbel:
      if (n > 0) t.clipped_loss(r, out.data(), n, 1.0 / spec.beta(), spec.clip());
      break;
  }
}

void loss_grads(const KernelTable& t, const LossSpec& spec, std::span<const double> residuals,
                std::span<double> out) {
  check_sizes(residuals, out);
  const std::size_t n = residuals.size();
  const double* r = residuals.data();
  switch (spec.variant()) {
    case LossVariant::Gumbel: t.gumbel_grad(r, out.data(), n, 1.0 / spec.beta()); break;
    case LossVariant::ExpandedGumbel:
    case LossVariant::L2: t.poly_grad(r, out.data(), n, 1.0 / spec.beta(), spec.order()); break;
    case LossVariant::Expectile: t.expectile_grad(r, out.data(), n, spec.tau()); break;
    case LossVariant::ClippedGumbel:
      if (n > 0) t.clipped_grad(r, out.data(), n, 1.0 / spec.beta(), spec.clip());
      break;
  }
}

void loss_values(const LossSpec& spec, std::span<const double> residuals, std::span<double> out) {
  loss_values(table(), spec, residuals, out);
}

void loss_grads(const LossSpec& spec, std::span<const double> residuals, std::span<double> out) {
  loss_grads(table(), spec, residuals, out);
}

double sum(std::span<const double> x) { return table().sum(x.data(), x.size()); }

BatchEval evaluate_batch(const LossSpec& spec, std::span<const double> residuals,
                         std::span<double> scratch) {
  if (residuals.empty()) throw InputError("evaluate_batch needs a nonempty batch");
  const KernelTable& t = table();
  const auto n = static_cast<double>(residuals.size());
  auto buf = scratch.first(residuals.size());
  loss_values(t, spec, residuals, buf);
  const double loss = t.sum(buf.data(), buf.size()) / n;
  loss_grads(t, spec, residuals, buf);
  const double grad = t.sum(buf.data(), buf.size()) / n;
  return {loss, grad, std::isfinite(loss) && std::isfinite(grad)};
}

}  // namespace mxql::kernels
