// SPDX-License-Identifier: Apache-2.0
//
// In-sample tabular value learning.  Q is fitted by least squares to
// r + gamma V(s'); V is fitted to Q(s, a) over the dataset's actions with a
// LossSpec, residual Q(s, a) - V(s).  Only (s, a) pairs present in the data
// are ever read or written.
#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mxql/losses.hpp"
#include "mxql/mdp.hpp"

namespace mxql {

enum class QMode { ClosedForm, Gradient };
enum class VMode { ClosedFormN2, Gradient };

QMode parse_q_mode(std::string_view name);
VMode parse_v_mode(std::string_view name);
std::string_view q_mode_name(QMode mode);
std::string_view v_mode_name(VMode mode);

/// Multiplicity-weighted view of an OfflineDataset.
class DatasetIndex {
 public:
  explicit DatasetIndex(const OfflineDataset& dataset);

  struct Outcome {
    double reward;
    std::size_t next_state;
    double weight;  // fraction of the (s, a) count
  };
  struct ActionWeight {
    std::size_t action;
    double weight;  // fraction of the state count
  };

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  std::size_t count(std::size_t s) const { return state_count_[s]; }
  std::size_t count(std::size_t s, std::size_t a) const { return pair_count_[s * num_actions_ + a]; }
  const std::vector<ActionWeight>& actions(std::size_t s) const { return actions_[s]; }
  const std::vector<Outcome>& outcomes(std::size_t s, std::size_t a) const {
    return outcomes_[s * num_actions_ + a];
  }
  std::size_t size() const { return total_; }

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::size_t total_ = 0;
  std::vector<std::size_t> state_count_;
  std::vector<std::size_t> pair_count_;
  std::vector<std::vector<ActionWeight>> actions_;
  std::vector<std::vector<Outcome>> outcomes_;
};

struct TrainConfig {
  LossSpec loss = LossSpec::expanded(1.0, 2);
  std::size_t v_steps = 50;
  std::size_t q_steps = 50;
  QMode q_mode = QMode::ClosedForm;
  VMode v_mode = VMode::Gradient;
  /// Unset means 0.1 * beta^2.
  std::optional<double> lr_v;
  double lr_q = 0.5;
  std::size_t outer_iterations = 100000;
  double tolerance = 1e-10;
  /// V(s) collapses when it leaves the hull of its start value and Q(s, .)
  /// widened by margin * max(width, beta).
  double escape_margin = 1.0;

  double resolved_lr_v() const;
  void validate() const;
};

struct StepReport {
  bool diverged = false;
  std::string message;  // names the state and residual on divergence
  double loss = 0.0;    // dataset-weighted mean loss after the step
};

/// Gradient descent on each state's weighted mean loss, `steps` times.
StepReport v_step(std::vector<double>& v, const std::vector<double>& q, const DatasetIndex& data,
                  const LossSpec& loss, double lr, std::size_t steps, double escape_margin = 1.0);

/// V(s) = weighted mean of Q(s, .); the L2 minimizer.
StepReport v_step_closed_form(std::vector<double>& v, const std::vector<double>& q,
                              const DatasetIndex& data);

/// Least squares on r + gamma V(s'), exactly or by `steps` gradient steps.
StepReport q_step(std::vector<double>& q, const std::vector<double>& v, const DatasetIndex& data,
                  double gamma, QMode mode, double lr = 0.5, std::size_t steps = 1);

struct ValueTables {
  std::vector<double> v;  // [s]
  std::vector<double> q;  // [s][a]
  std::size_t iterations = 0;
  bool converged = false;
  bool diverged = false;
  std::string divergence;
  double v_loss = 0.0;
  double q_loss = 0.0;
};

struct TraceRow {
  std::size_t iteration;
  double max_change;
  double v_loss;
  double q_loss;
};

struct TrainResult {
  ValueTables tables;
  std::vector<TraceRow> trace;
};

/// Alternates q_step and v_step from V = 0, Q = 0 until the max change in V
/// falls below the tolerance.  On divergence the partial trace is returned.
TrainResult train(const TabularMdp& mdp, const OfflineDataset& dataset, const TrainConfig& config);

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);
/// Columns: state, v, q_0 .. q_{A-1}.
void write_tables_csv(std::ostream& out, const ValueTables& tables, std::size_t num_actions);

}  // namespace mxql
