// SPDX-License-Identifier: Apache-2.0
#include "mxql/rng.hpp"

#include <array>

#include "mxql/error.hpp"

namespace mxql {
namespace {

std::mt19937_64 seeded(std::uint64_t a, std::uint64_t b, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32), tag};
  return std::mt19937_64(seq);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(seeded(seed, 0, 0x6d78716cu)) {}

Rng::Rng(std::uint64_t master_seed, std::uint64_t stream_index)
    : engine_(seeded(master_seed, stream_index, 0x73747265u)) {}

double Rng::uniform_open() {
  // 53 random bits mapped to the midpoints (k + 0.5) / 2^53.
  const std::uint64_t k = engine_() >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw InputError("uniform_index needs a positive range");
  // Reject the low (2^64 mod n) values so every residue is equally likely.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t x = engine_();
    if (x >= threshold) return x % n;
  }
}

}  // namespace mxql
