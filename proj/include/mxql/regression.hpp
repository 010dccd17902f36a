// SPDX-License-Identifier: Apache-2.0
//
// Scalar Gumbel regression under matched and mismatched temperatures.
//
// Data x_i ~ -G(0, beta_data) are fitted with a loss of temperature beta_reg
// by minibatch SGD on a single parameter h.  The absolute error |h - h*| is
// recorded at fixed update counts, where h* is the exact minimizer of the
// empirical Gumbel loss, beta_reg * log mean_i exp(x_i / beta_reg).
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mxql/losses.hpp"
#include "mxql/rng.hpp"

namespace mxql {

inline constexpr std::uint64_t kDefaultSeed = 20240601;

enum class TargetKind {
  /// beta_reg * log mean exp(x / beta_reg): minimizer of the empirical loss.
  Minimizer,
  /// log sum exp(x / beta_reg), as printed in the original figure caption.
  Caption,
};

std::string_view target_kind_name(TargetKind kind);
TargetKind parse_target_kind(std::string_view name);

struct RegressionConfig {
  double beta_data = 2.0;
  double beta_reg = 2.0;
  LossSpec loss = LossSpec::gumbel(2.0);  // loss.beta() must equal beta_reg
  std::size_t n_data = 10000;
  double lr = 0.02;
  std::size_t batch_size = 32;
  std::vector<std::size_t> checkpoints{10, 100, 500, 1000, 2000};
  std::size_t repeats = 100;
  std::uint64_t master_seed = kDefaultSeed;
  double h_init = 1.0;
  TargetKind target = TargetKind::Minimizer;
  /// Draw a fresh dataset for every repeat; otherwise all repeats share one.
  bool resample_per_repeat = true;
  /// A repeat collapses when h leaves [min x - m*span, max x + m*span],
  /// span = max x - min x.  Non-finite values always count as divergence.
  double escape_margin = 1.0;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

/// n i.i.d. draws of -G(0, beta_data).
std::vector<double> generate_data(double beta_data, std::size_t n, Rng& rng);

/// beta * log mean_i exp(x_i / beta), max-shifted.
double target_value(std::span<const double> data, double beta_reg);
/// log sum_i exp(x_i / beta).
double caption_target_value(std::span<const double> data, double beta_reg);

struct RepeatResult {
  bool diverged = false;
  /// Update at which divergence was detected (0 when none).
  std::size_t diverged_at = 0;
  double target = 0.0;
  /// |h - target| per checkpoint; missing after divergence.
  std::vector<std::optional<double>> errors;
  /// Estimate after the last completed update.
  double final_h = 0.0;
};

/// Dataset used by a repeat (fresh or shared, per config).
std::vector<double> repeat_dataset(const RegressionConfig& config, std::size_t repeat_index);

RepeatResult run_repeat(const RegressionConfig& config, std::size_t repeat_index);

struct CheckpointStats {
  std::size_t checkpoint = 0;
  std::size_t count = 0;  // repeats with a value at this checkpoint
  std::optional<double> mean;
  std::optional<double> std;  // needs count >= 2
  std::size_t diverged = 0;   // repeats diverged at or before this checkpoint
};

struct RegressionTrace {
  RegressionConfig config;
  std::vector<RepeatResult> repeats;
  std::vector<CheckpointStats> stats;
  std::size_t diverged_count = 0;

  bool all_diverged() const { return diverged_count == repeats.size(); }
};

/// Aggregates per-checkpoint mean/std over the repeats still alive.
std::vector<CheckpointStats> aggregate(const std::vector<RepeatResult>& repeats,
                                       std::span<const std::size_t> checkpoints);

/// All repeats of one (beta_data, beta_reg) cell, run on up to `threads`
/// workers.  The result does not depend on the thread count.
RegressionTrace run_cell(const RegressionConfig& config, unsigned threads = 0);

/// Cells are visited beta_data-major, in the given order.
std::vector<RegressionTrace> run_experiment(const RegressionConfig& base,
                                            std::span<const double> betas_data,
                                            std::span<const double> betas_reg,
                                            unsigned threads = 0);

struct DescentResult {
  double h = 0.0;
  bool diverged = false;
  std::size_t updates = 0;
};

/// Plain gradient descent using the whole dataset at every update.
DescentResult full_batch_descent(std::span<const double> data, const LossSpec& loss, double lr,
                                 std::size_t updates, double h_init);

inline const std::vector<std::string>& regression_csv_header() {
  static const std::vector<std::string> h{"cell_beta_data", "cell_beta_reg",  "loss_variant",
                                          "order",          "checkpoint",     "mean_abs_error",
                                          "std_abs_error",  "diverged_count", "repeats",
                                          "status"};
  return h;
}

/// One row per (cell, checkpoint).  status is "ok" or "all_diverged";
/// mean/std are empty when undefined.
void write_regression_csv(std::ostream& out, const std::vector<RegressionTrace>& traces);

}  // namespace mxql
