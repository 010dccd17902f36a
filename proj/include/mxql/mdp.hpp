// SPDX-License-Identifier: Apache-2.0
//
// Finite MDPs with a fixed behavior policy, offline datasets drawn from
// them, and the two exact reference values:
//   V^mu : value of following mu (policy evaluation, direct linear solve)
//   V*_b : soft value  V(s) = b log sum_a mu(a|s) exp(Q(s,a)/b)
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mxql/rng.hpp"

namespace mxql {

class TabularMdp {
 public:
  /// transition is row-major [s][a][s'], reward and policy are [s][a].
  /// Throws ConfigError unless rows are stochastic within 1e-12 and
  /// gamma is in [0, 1).
  TabularMdp(std::size_t num_states, std::size_t num_actions, std::vector<double> transition,
             std::vector<double> reward, std::vector<double> policy, double gamma,
             std::string name = "custom");

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  double gamma() const { return gamma_; }
  const std::string& name() const { return name_; }

  double transition(std::size_t s, std::size_t a, std::size_t next) const {
    return transition_[(s * num_actions_ + a) * num_states_ + next];
  }
  double reward(std::size_t s, std::size_t a) const { return reward_[s * num_actions_ + a]; }
  double policy(std::size_t s, std::size_t a) const { return policy_[s * num_actions_ + a]; }

  const std::vector<double>& transitions() const { return transition_; }
  const std::vector<double>& rewards() const { return reward_; }
  const std::vector<double>& policies() const { return policy_; }

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<double> transition_;
  std::vector<double> reward_;
  std::vector<double> policy_;
  double gamma_;
  std::string name_;
};

/// Text format, whitespace separated, '#' starts a comment:
///   states S
///   actions A
///   gamma g
///   transition <S*A*S numbers, [s][a][s'] order>
///   reward <S*A numbers>
///   policy <S*A numbers>
TabularMdp parse_mdp(std::istream& in, std::string name = "file");
TabularMdp load_mdp_file(const std::string& path);
void write_mdp(std::ostream& out, const TabularMdp& mdp);

/// Built-in MDPs: "bandit", "chain3", "risky5".
std::vector<std::string> zoo_names();
TabularMdp zoo_mdp(std::string_view name);

/// V^mu by solving (I - gamma P^mu) V = r^mu.
std::vector<double> behavior_value(const TabularMdp& mdp);

/// Q(s,a) = r(s,a) + gamma sum_s' P(s'|s,a) V(s').
std::vector<double> action_values(const TabularMdp& mdp, const std::vector<double>& v);

/// max_s |V(s) - r^mu(s) - gamma (P^mu V)(s)|.
double bellman_residual(const TabularMdp& mdp, const std::vector<double>& v);

struct SoftValues {
  std::vector<double> v;  // [s]
  std::vector<double> q;  // [s][a]
  std::size_t iterations = 0;
};

/// Fixed point of the soft Bellman operator with temperature beta, iterated
/// until the max change falls below `tolerance`.
SoftValues soft_value(const TabularMdp& mdp, double beta, double tolerance = 1e-13,
                      std::size_t max_iterations = 1'000'000);

/// Stationary state distribution of P^mu by power iteration.
std::vector<double> stationary_distribution(const TabularMdp& mdp, double tolerance = 1e-13,
                                            std::size_t max_iterations = 1'000'000);

struct Transition {
  std::size_t state;
  std::size_t action;
  double reward;
  std::size_t next_state;

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Offline data; repeated entries carry the empirical weights.
struct OfflineDataset {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<Transition> transitions;
};

enum class DatasetMode { Exhaustive, Rollout };

DatasetMode parse_dataset_mode(std::string_view name);

/// Enumerates (s, a, s') with counts proportional to mu(a|s) P(s'|s,a),
/// every state weighted equally, rounded to `size` entries by largest
/// remainder.  Throws InputError when some supported triple would get no
/// entry.
OfflineDataset exhaustive_dataset(const TabularMdp& mdp, std::size_t size);

/// Trajectories under mu from `start_state`, restarted every `horizon`
/// steps, until `size` transitions are collected.
OfflineDataset rollout_dataset(const TabularMdp& mdp, std::size_t size, std::size_t horizon,
                               Rng& rng, std::size_t start_state = 0);

}  // namespace mxql
