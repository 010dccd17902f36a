// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace mxql {

/// Seedable, splittable 64-bit generator.
///
/// Wraps std::mt19937_64, whose output sequence is fully specified by the
/// standard, and derives variates from raw bits only (no std::*_distribution,
/// whose algorithms differ between standard libraries).  Independent streams
/// are keyed by (master_seed, stream_index) through std::seed_seq.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  Rng(std::uint64_t master_seed, std::uint64_t stream_index);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on the open interval (0, 1); both endpoints are excluded.
  double uniform_open();
  /// Uniform integer in [0, n), unbiased.  n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace mxql
