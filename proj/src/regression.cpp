// SPDX-License-Identifier: Apache-2.0
#include "mxql/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "mxql/csv.hpp"
#include "mxql/distributions.hpp"
#include "mxql/error.hpp"
#include "mxql/kernels.hpp"
#include "mxql/parallel.hpp"

namespace mxql {
namespace {

// Stream index reserved for the shared dataset.
constexpr std::uint64_t kSharedDatasetStream = ~std::uint64_t{0};

double log_mean_exp_scaled(std::span<const double> data, double beta) {
  const double top = *std::max_element(data.begin(), data.end());
  double s = 0.0;
  for (double x : data) s += std::exp((x - top) / beta);
  return top / beta + std::log(s / static_cast<double>(data.size()));
}

}  // namespace

std::string_view target_kind_name(TargetKind kind) {
  return kind == TargetKind::Minimizer ? "minimizer" : "caption";
}

TargetKind parse_target_kind(std::string_view name) {
  if (name == "minimizer") return TargetKind::Minimizer;
  if (name == "caption") return TargetKind::Caption;
  throw ConfigError("unknown target '" + std::string(name) + "' (expected minimizer or caption)");
}

void RegressionConfig::validate() const {
  if (!(beta_data > 0.0) || !(beta_reg > 0.0)) throw ConfigError("betas must be positive");
  if (loss.variant() != LossVariant::Expectile && loss.beta() != beta_reg)
    throw ConfigError("loss temperature must equal beta_reg");
  if (n_data == 0 || batch_size == 0) throw ConfigError("n_data and batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (repeats == 0) throw ConfigError("repeats must be positive");
  if (checkpoints.empty()) throw ConfigError("at least one checkpoint is required");
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] == 0) throw ConfigError("checkpoints must be positive");
    if (i > 0 && checkpoints[i] <= checkpoints[i - 1])
      throw ConfigError("checkpoints must be strictly ascending");
  }
  if (!std::isfinite(h_init)) throw ConfigError("h_init must be finite");
  if (std::isnan(escape_margin) || escape_margin < 0.0)
    throw ConfigError("escape_margin must be >= 0 (inf disables the collapse rule)");
}

std::vector<double> generate_data(double beta_data, std::size_t n, Rng& rng) {
  const GumbelParams noise{0.0, beta_data, true};
  noise.validate();
  std::vector<double> out(n);
  for (double& x : out) x = sample_gumbel(noise, rng);
  return out;
}

double target_value(std::span<const double> data, double beta_reg) {
  if (data.empty()) throw InputError("target_value needs data");
  if (!(beta_reg > 0.0)) throw ConfigError("beta_reg must be positive");
  return beta_reg * log_mean_exp_scaled(data, beta_reg);
}

double caption_target_value(std::span<const double> data, double beta_reg) {
  if (data.empty()) throw InputError("target_value needs data");
  if (!(beta_reg > 0.0)) throw ConfigError("beta_reg must be positive");
  return log_mean_exp_scaled(data, beta_reg) + std::log(static_cast<double>(data.size()));
}

std::vector<double> repeat_dataset(const RegressionConfig& config, std::size_t repeat_index) {
  Rng rng = config.resample_per_repeat ? Rng(config.master_seed, repeat_index)
                                       : Rng(config.master_seed, kSharedDatasetStream);
  return generate_data(config.beta_data, config.n_data, rng);
}

RepeatResult run_repeat(const RegressionConfig& config, std::size_t repeat_index) {
  config.validate();
  // With a fresh dataset the same stream continues into batch sampling.
  Rng rng(config.master_seed, repeat_index);
  std::vector<double> data;
  if (config.resample_per_repeat) {
    data = generate_data(config.beta_data, config.n_data, rng);
  } else {
    data = repeat_dataset(config, repeat_index);
  }

  RepeatResult result;
  result.target = config.target == TargetKind::Minimizer
                      ? target_value(data, config.beta_reg)
                      : caption_target_value(data, config.beta_reg);
  result.errors.assign(config.checkpoints.size(), std::nullopt);

  const auto [lo_it, hi_it] = std::minmax_element(data.begin(), data.end());
  const double span = *hi_it - *lo_it;
  const double margin = config.escape_margin * span;
  const double lower = std::isinf(margin) ? -HUGE_VAL : *lo_it - margin;
  const double upper = std::isinf(margin) ? HUGE_VAL : *hi_it + margin;

  std::vector<double> residuals(config.batch_size);
  std::vector<double> scratch(config.batch_size);
  double h = config.h_init;
  std::size_t next_checkpoint = 0;
  const std::size_t total = config.checkpoints.back();
  for (std::size_t t = 1; t <= total; ++t) {
    for (double& r : residuals) r = data[rng.uniform_index(data.size())] - h;
    const auto eval = kernels::evaluate_batch(config.loss, residuals, scratch);
    if (eval.finite) h -= config.lr * eval.mean_grad;
    if (!eval.finite || !std::isfinite(h) || h < lower || h > upper) {
      result.diverged = true;
      result.diverged_at = t;
      break;
    }
    result.final_h = h;
    if (t == config.checkpoints[next_checkpoint]) {
      result.errors[next_checkpoint] = std::abs(h - result.target);
      ++next_checkpoint;
    }
  }
  if (!result.diverged) result.final_h = h;
  return result;
}

std::vector<CheckpointStats> aggregate(const std::vector<RepeatResult>& repeats,
                                       std::span<const std::size_t> checkpoints) {
  std::vector<CheckpointStats> out;
  out.reserve(checkpoints.size());
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    CheckpointStats s;
    s.checkpoint = checkpoints[c];
    double sum = 0.0;
    for (const auto& r : repeats) {
      if (c < r.errors.size() && r.errors[c]) {
        sum += *r.errors[c];
        ++s.count;
      }
    }
    s.diverged = repeats.size() - s.count;
    if (s.count > 0) {
      const double mean = sum / static_cast<double>(s.count);
      s.mean = mean;
      if (s.count >= 2) {
        double ss = 0.0;
        for (const auto& r : repeats)
          if (c < r.errors.size() && r.errors[c]) ss += (*r.errors[c] - mean) * (*r.errors[c] - mean);
        s.std = std::sqrt(ss / static_cast<double>(s.count - 1));
      }
    }
    out.push_back(s);
  }
  return out;
}

RegressionTrace run_cell(const RegressionConfig& config, unsigned threads) {
  config.validate();
  RegressionTrace trace;
  trace.config = config;
  trace.repeats.resize(config.repeats);
  parallel_for(config.repeats, threads,
               [&](std::size_t i) { trace.repeats[i] = run_repeat(config, i); });
  trace.stats = aggregate(trace.repeats, config.checkpoints);
  trace.diverged_count = static_cast<std::size_t>(std::count_if(
      trace.repeats.begin(), trace.repeats.end(), [](const RepeatResult& r) { return r.diverged; }));
  return trace;
}

std::vector<RegressionTrace> run_experiment(const RegressionConfig& base,
                                            std::span<const double> betas_data,
                                            std::span<const double> betas_reg, unsigned threads) {
  std::vector<RegressionTrace> out;
  for (double bd : betas_data) {
    for (double br : betas_reg) {
      RegressionConfig cell = base;
      cell.beta_data = bd;
      cell.beta_reg = br;
      cell.loss = base.loss.with_beta(br);
      out.push_back(run_cell(cell, threads));
    }
  }
  return out;
}

DescentResult full_batch_descent(std::span<const double> data, const LossSpec& loss, double lr,
                                 std::size_t updates, double h_init) {
  if (data.empty()) throw InputError("full_batch_descent needs data");
  std::vector<double> residuals(data.size());
  std::vector<double> scratch(data.size());
  DescentResult out;
  out.h = h_init;
  for (std::size_t t = 0; t < updates; ++t) {
    for (std::size_t i = 0; i < data.size(); ++i) residuals[i] = data[i] - out.h;
    const auto eval = kernels::evaluate_batch(loss, residuals, scratch);
    const double next = out.h - lr * eval.mean_grad;
    if (!eval.finite || !std::isfinite(next)) {
      out.diverged = true;
      break;
    }
    out.h = next;
    out.updates = t + 1;
  }
  return out;
}

void write_regression_csv(std::ostream& out, const std::vector<RegressionTrace>& traces) {
  CsvWriter csv(out, regression_csv_header());
  for (const auto& trace : traces) {
    const auto& cfg = trace.config;
    for (const auto& s : trace.stats) {
      csv.add(cfg.beta_data)
          .add(cfg.beta_reg)
          .add(cfg.loss.name())
          .add(cfg.loss.order())
          .add(s.checkpoint)
          .add(s.mean)
          .add(s.std)
          .add(s.diverged)
          .add(cfg.repeats)
          .add(std::string_view(s.count == 0 ? "all_diverged" : "ok"));
      csv.end_row();
    }
  }
}

}  // namespace mxql
