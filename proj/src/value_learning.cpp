// SPDX-License-Identifier: Apache-2.0
#include "mxql/value_learning.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <utility>

#include "mxql/csv.hpp"
#include "mxql/error.hpp"
#include "mxql/kernels.hpp"

namespace mxql {

QMode parse_q_mode(std::string_view name) {
  if (name == "closed" || name == "closed_form") return QMode::ClosedForm;
  if (name == "gradient") return QMode::Gradient;
  throw ConfigError("unknown q mode '" + std::string(name) + "' (expected closed or gradient)");
}

VMode parse_v_mode(std::string_view name) {
  if (name == "closed" || name == "closed_form_n2") return VMode::ClosedFormN2;
  if (name == "gradient") return VMode::Gradient;
  throw ConfigError("unknown v mode '" + std::string(name) + "' (expected closed or gradient)");
}

std::string_view q_mode_name(QMode mode) { return mode == QMode::ClosedForm ? "closed" : "gradient"; }
std::string_view v_mode_name(VMode mode) { return mode == VMode::ClosedFormN2 ? "closed" : "gradient"; }

DatasetIndex::DatasetIndex(const OfflineDataset& dataset)
    : num_states_(dataset.num_states),
      num_actions_(dataset.num_actions),
      state_count_(num_states_, 0),
      pair_count_(num_states_ * num_actions_, 0),
      actions_(num_states_),
      outcomes_(num_states_ * num_actions_) {
  std::vector<std::map<std::pair<double, std::size_t>, std::size_t>> groups(num_states_ * num_actions_);
  for (const auto& t : dataset.transitions) {
    if (t.state >= num_states_ || t.next_state >= num_states_ || t.action >= num_actions_)
      throw InputError("dataset transition out of range");
    if (!std::isfinite(t.reward)) throw InputError("dataset reward is not finite");
    ++state_count_[t.state];
    ++pair_count_[t.state * num_actions_ + t.action];
    ++groups[t.state * num_actions_ + t.action][{t.reward, t.next_state}];
    ++total_;
  }
  for (std::size_t s = 0; s < num_states_; ++s) {
    for (std::size_t a = 0; a < num_actions_; ++a) {
      const std::size_t k = s * num_actions_ + a;
      if (pair_count_[k] == 0) continue;
      const auto pair_n = static_cast<double>(pair_count_[k]);
      actions_[s].push_back({a, pair_n / static_cast<double>(state_count_[s])});
      for (const auto& [key, c] : groups[k])
        outcomes_[k].push_back({key.first, key.second, static_cast<double>(c) / pair_n});
    }
  }
}

double TrainConfig::resolved_lr_v() const {
  return lr_v ? *lr_v : 0.1 * loss.beta() * loss.beta();
}

void TrainConfig::validate() const {
  if (v_steps == 0 || q_steps == 0 || outer_iterations == 0)
    throw ConfigError("step and iteration counts must be positive");
  if (!(resolved_lr_v() > 0.0) || !std::isfinite(resolved_lr_v()))
    throw ConfigError("lr_v must be positive");
  if (!(lr_q > 0.0) || !std::isfinite(lr_q)) throw ConfigError("lr_q must be positive");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (std::isnan(escape_margin) || escape_margin < 0.0)
    throw ConfigError("escape_margin must be >= 0 (inf disables the collapse rule)");
  if (v_mode == VMode::ClosedFormN2 && loss.variant() != LossVariant::L2 &&
      !(loss.variant() == LossVariant::ExpandedGumbel && loss.order() == 2))
    throw ConfigError("closed-form V step requires the n=2 (L2) loss");
}

namespace {

double weighted_state_loss(const LossSpec& loss, const DatasetIndex::ActionWeight* w,
                           std::span<const double> residuals, std::span<double> buf) {
  kernels::loss_values(loss, residuals, buf);
  double acc = 0.0;
  for (std::size_t i = 0; i < residuals.size(); ++i) acc += w[i].weight * buf[i];
  return acc;
}

}  // namespace

StepReport v_step(std::vector<double>& v, const std::vector<double>& q, const DatasetIndex& data,
                  const LossSpec& loss, double lr, std::size_t steps, double escape_margin) {
  const std::size_t A = data.num_actions();
  StepReport report;
  std::vector<double> residuals;
  std::vector<double> buf;
  double total_loss = 0.0;
  for (std::size_t s = 0; s < data.num_states(); ++s) {
    const auto& acts = data.actions(s);
    if (acts.empty()) continue;
    residuals.resize(acts.size());
    buf.resize(acts.size());

    double lo = v[s];
    double hi = v[s];
    for (const auto& aw : acts) {
      lo = std::min(lo, q[s * A + aw.action]);
      hi = std::max(hi, q[s * A + aw.action]);
    }
    const double pad = escape_margin * std::max(hi - lo, loss.beta());
    if (!std::isinf(pad)) {
      lo -= pad;
      hi += pad;
    } else {
      lo = -HUGE_VAL;
      hi = HUGE_VAL;
    }

    for (std::size_t step = 0; step < steps; ++step) {
      for (std::size_t i = 0; i < acts.size(); ++i) residuals[i] = q[s * A + acts[i].action] - v[s];
      kernels::loss_grads(loss, residuals, buf);
      double grad = 0.0;
      for (std::size_t i = 0; i < acts.size(); ++i) grad += acts[i].weight * buf[i];
      const double next = v[s] - lr * grad;
      if (!std::isfinite(grad) || !std::isfinite(next) || next < lo || next > hi) {
        const auto worst = std::max_element(residuals.begin(), residuals.end(),
                                            [](double a, double b) { return std::abs(a) < std::abs(b); });
        report.diverged = true;
        report.message = "V step diverged at state " + std::to_string(s) + " (residual " +
                         format_double(*worst) + ", gradient " + format_double(grad) + ")";
        return report;
      }
      v[s] = next;
    }
    for (std::size_t i = 0; i < acts.size(); ++i) residuals[i] = q[s * A + acts[i].action] - v[s];
    total_loss += static_cast<double>(data.count(s)) * weighted_state_loss(loss, acts.data(), residuals, buf);
  }
  report.loss = data.size() ? total_loss / static_cast<double>(data.size()) : 0.0;
  return report;
}

StepReport v_step_closed_form(std::vector<double>& v, const std::vector<double>& q,
                              const DatasetIndex& data) {
  const std::size_t A = data.num_actions();
  StepReport report;
  double total_loss = 0.0;
  for (std::size_t s = 0; s < data.num_states(); ++s) {
    const auto& acts = data.actions(s);
    if (acts.empty()) continue;
    double mean = 0.0;
    for (const auto& aw : acts) mean += aw.weight * q[s * A + aw.action];
    v[s] = mean;
    double loss = 0.0;
    for (const auto& aw : acts) {
      const double r = q[s * A + aw.action] - mean;
      loss += aw.weight * 0.5 * r * r;
    }
    total_loss += static_cast<double>(data.count(s)) * loss;
  }
  report.loss = data.size() ? total_loss / static_cast<double>(data.size()) : 0.0;
  return report;
}

StepReport q_step(std::vector<double>& q, const std::vector<double>& v, const DatasetIndex& data,
                  double gamma, QMode mode, double lr, std::size_t steps) {
  const std::size_t A = data.num_actions();
  StepReport report;
  double total_loss = 0.0;
  for (std::size_t s = 0; s < data.num_states(); ++s) {
    for (const auto& aw : data.actions(s)) {
      const std::size_t k = s * A + aw.action;
      const auto& outs = data.outcomes(s, aw.action);
      double target = 0.0;
      for (const auto& o : outs) target += o.weight * (o.reward + gamma * v[o.next_state]);
      if (mode == QMode::ClosedForm) {
        q[k] = target;
      } else {
        // d/dQ of mean (y - Q)^2 / 2 is Q - mean y.
        for (std::size_t i = 0; i < steps; ++i) q[k] -= lr * (q[k] - target);
      }
      if (!std::isfinite(q[k])) {
        report.diverged = true;
        report.message = "Q step produced a non-finite value at (s=" + std::to_string(s) +
                         ", a=" + std::to_string(aw.action) + ")";
        return report;
      }
      double mse = 0.0;
      for (const auto& o : outs) {
        const double e = o.reward + gamma * v[o.next_state] - q[k];
        mse += o.weight * e * e;
      }
      total_loss += static_cast<double>(data.count(s, aw.action)) * mse;
    }
  }
  report.loss = data.size() ? total_loss / static_cast<double>(data.size()) : 0.0;
  return report;
}

TrainResult train(const TabularMdp& mdp, const OfflineDataset& dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.num_states != mdp.num_states() || dataset.num_actions != mdp.num_actions())
    throw InputError("dataset shape does not match the MDP");
  const DatasetIndex data(dataset);
  const double lr_v = config.resolved_lr_v();

  TrainResult result;
  auto& t = result.tables;
  t.v.assign(mdp.num_states(), 0.0);
  t.q.assign(mdp.num_states() * mdp.num_actions(), 0.0);
  std::vector<double> previous;
  for (std::size_t it = 1; it <= config.outer_iterations; ++it) {
    previous = t.v;
    const StepReport qr = q_step(t.q, t.v, data, mdp.gamma(), config.q_mode, config.lr_q, config.q_steps);
    StepReport vr = qr;
    if (!qr.diverged) {
      vr = config.v_mode == VMode::ClosedFormN2
               ? v_step_closed_form(t.v, t.q, data)
               : v_step(t.v, t.q, data, config.loss, lr_v, config.v_steps, config.escape_margin);
    }
    t.iterations = it;
    if (vr.diverged) {
      t.diverged = true;
      t.divergence = vr.message;
      break;
    }
    double change = 0.0;
    for (std::size_t s = 0; s < t.v.size(); ++s) change = std::max(change, std::abs(t.v[s] - previous[s]));
    t.v_loss = vr.loss;
    t.q_loss = qr.loss;
    result.trace.push_back({it, change, vr.loss, qr.loss});
    if (change < config.tolerance) {
      t.converged = true;
      break;
    }
  }
  return result;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  CsvWriter csv(out, {"iteration", "max_change", "v_loss", "q_loss"});
  for (const auto& row : trace) {
    csv.add(row.iteration).add(row.max_change).add(row.v_loss).add(row.q_loss);
    csv.end_row();
  }
}

void write_tables_csv(std::ostream& out, const ValueTables& tables, std::size_t num_actions) {
  std::vector<std::string> header{"state", "v"};
  for (std::size_t a = 0; a < num_actions; ++a) header.push_back("q_" + std::to_string(a));
  CsvWriter csv(out, header);
  for (std::size_t s = 0; s < tables.v.size(); ++s) {
    csv.add(s).add(tables.v[s]);
    for (std::size_t a = 0; a < num_actions; ++a) csv.add(tables.q[s * num_actions + a]);
    csv.end_row();
  }
}

}  // namespace mxql
