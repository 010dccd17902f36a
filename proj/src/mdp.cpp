// SPDX-License-Identifier: Apache-2.0
#include "mxql/mdp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mxql/csv.hpp"
#include "mxql/error.hpp"

namespace mxql {
namespace {

constexpr double kRowTolerance = 1e-12;

void check_rows(const std::vector<double>& table, std::size_t rows, std::size_t width,
                const char* what) {
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      const double p = table[r * width + c];
      if (!(p >= 0.0) || !std::isfinite(p))
        throw ConfigError(std::string(what) + " entries must be finite probabilities");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowTolerance)
      throw ConfigError(std::string(what) + " row " + std::to_string(r) + " sums to " +
                        format_double(sum) + ", not 1");
  }
}

// Behavior-weighted reward and transition matrix.
void behavior_model(const TabularMdp& mdp, Eigen::VectorXd& r_mu, Eigen::MatrixXd& p_mu) {
  const std::size_t S = mdp.num_states();
  const std::size_t A = mdp.num_actions();
  r_mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(S));
  p_mu = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      const double mu = mdp.policy(s, a);
      if (mu == 0.0) continue;
      r_mu(static_cast<Eigen::Index>(s)) += mu * mdp.reward(s, a);
      for (std::size_t n = 0; n < S; ++n)
        p_mu(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(n)) += mu * mdp.transition(s, a, n);
    }
  }
}

}  // namespace

TabularMdp::TabularMdp(std::size_t num_states, std::size_t num_actions,
                       std::vector<double> transition, std::vector<double> reward,
                       std::vector<double> policy, double gamma, std::string name)
    : num_states_(num_states),
      num_actions_(num_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      policy_(std::move(policy)),
      gamma_(gamma),
      name_(std::move(name)) {
  if (num_states_ == 0 || num_actions_ == 0) throw ConfigError("MDP needs states and actions");
  const std::size_t sa = num_states_ * num_actions_;
  if (transition_.size() != sa * num_states_)
    throw ConfigError("transition table must have S*A*S entries");
  if (reward_.size() != sa) throw ConfigError("reward table must have S*A entries");
  if (policy_.size() != sa) throw ConfigError("policy table must have S*A entries");
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  for (double r : reward_)
    if (!std::isfinite(r)) throw ConfigError("rewards must be finite");
  check_rows(transition_, sa, num_states_, "transition");
  check_rows(policy_, num_states_, num_actions_, "policy");
}

// ---------------------------------------------------------------------------
// File format

TabularMdp parse_mdp(std::istream& in, std::string name) {
  std::ostringstream cleaned;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    cleaned << line.substr(0, hash) << '\n';
  }
  std::istringstream tokens(cleaned.str());

  std::map<std::string, std::vector<double>> tables;
  std::size_t states = 0;
  std::size_t actions = 0;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  std::string key;
  auto read_number = [&](const std::string& k) {
    std::string tok;
    if (!(tokens >> tok)) throw ConfigError("MDP file: missing value for '" + k + "'");
    double v{};
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
      throw ConfigError("MDP file: '" + k + "' expects a number, got '" + tok + "'");
    return v;
  };
  auto read_count = [&](const std::string& k) {
    const double v = read_number(k);
    if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("MDP file: '" + k + "' must be a positive integer");
    return static_cast<std::size_t>(v);
  };
  while (tokens >> key) {
    if (key == "states") {
      states = read_count(key);
    } else if (key == "actions") {
      actions = read_count(key);
    } else if (key == "gamma") {
      gamma = read_number(key);
    } else if (key == "transition" || key == "reward" || key == "policy") {
      if (states == 0 || actions == 0)
        throw ConfigError("MDP file: 'states' and 'actions' must precede '" + key + "'");
      const std::size_t count = key == "transition" ? states * actions * states : states * actions;
      auto& table = tables[key];
      table.resize(count);
      for (double& v : table) v = read_number(key);
    } else {
      throw ConfigError("MDP file: unknown key '" + key + "'");
    }
  }
  for (const char* k : {"transition", "reward", "policy"})
    if (!tables.count(k)) throw ConfigError(std::string("MDP file: missing '") + k + "'");
  if (std::isnan(gamma)) throw ConfigError("MDP file: missing 'gamma'");
  return TabularMdp(states, actions, tables["transition"], tables["reward"], tables["policy"],
                    gamma, std::move(name));
}

TabularMdp load_mdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open MDP file '" + path + "'");
  return parse_mdp(in, path);
}

void write_mdp(std::ostream& out, const TabularMdp& mdp) {
  const std::size_t S = mdp.num_states();
  const std::size_t A = mdp.num_actions();
  out << "states " << S << "\nactions " << A << "\ngamma " << format_double(mdp.gamma())
      << "\ntransition\n";
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t n = 0; n < S; ++n) out << (n ? " " : "") << format_double(mdp.transition(s, a, n));
      out << '\n';
    }
  out << "reward\n";
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) out << (a ? " " : "") << format_double(mdp.reward(s, a));
    out << '\n';
  }
  out << "policy\n";
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) out << (a ? " " : "") << format_double(mdp.policy(s, a));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Zoo

std::vector<std::string> zoo_names() { return {"bandit", "chain3", "risky5"}; }

TabularMdp zoo_mdp(std::string_view name) {
  if (name == "bandit") {
    // One state, three arms, self loop.
    return TabularMdp(1, 3, {1.0, 1.0, 1.0}, {0.0, 0.5, 1.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0.5,
                      "bandit");
  }
  if (name == "chain3") {
    // Actions: 0 = left, 1 = right.  Pushing right at the end pays 1.
    const std::size_t S = 3;
    std::vector<double> p(S * 2 * S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      p[(s * 2 + 0) * S + (s == 0 ? 0 : s - 1)] = 1.0;
      p[(s * 2 + 1) * S + std::min(s + 1, S - 1)] = 1.0;
    }
    return TabularMdp(S, 2, std::move(p), {0.0, 0.0, 0.0, 0.0, 0.0, 1.0},
                      {0.5, 0.5, 0.5, 0.5, 0.5, 0.5}, 0.9, "chain3");
  }
  if (name == "risky5") {
    // States 0..3 form a ladder; 4 is a jackpot state.  Action 0 (safe)
    // climbs the ladder for a small reward; action 1 (risky) pays nothing
    // and lands on the jackpot or back at the bottom with equal odds.  The
    // behavior policy mostly plays safe.
    const std::size_t S = 5;
    std::vector<double> p(S * 2 * S, 0.0);
    std::vector<double> r(S * 2, 0.0);
    std::vector<double> mu(S * 2, 0.0);
    for (std::size_t s = 0; s < 4; ++s) {
      p[(s * 2 + 0) * S + std::min<std::size_t>(s + 1, 3)] = 1.0;
      p[(s * 2 + 1) * S + 4] = 0.5;
      p[(s * 2 + 1) * S + 0] = 0.5;
      r[s * 2 + 0] = 0.1;
      r[s * 2 + 1] = 0.0;
    }
    p[(4 * 2 + 0) * S + 0] = 1.0;
    p[(4 * 2 + 1) * S + 0] = 1.0;
    r[4 * 2 + 0] = 2.0;
    r[4 * 2 + 1] = 2.0;
    for (std::size_t s = 0; s < S; ++s) {
      mu[s * 2 + 0] = 0.8;
      mu[s * 2 + 1] = 0.2;
    }
    return TabularMdp(S, 2, std::move(p), std::move(r), std::move(mu), 0.9, "risky5");
  }
  std::string known;
  for (const auto& n : zoo_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown MDP '" + std::string(name) + "' (zoo: " + known + ")");
}

// ---------------------------------------------------------------------------
// Oracles

std::vector<double> behavior_value(const TabularMdp& mdp) {
  Eigen::VectorXd r_mu;
  Eigen::MatrixXd p_mu;
  behavior_model(mdp, r_mu, p_mu);
  const auto S = static_cast<Eigen::Index>(mdp.num_states());
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(S, S) - mdp.gamma() * p_mu;
  const Eigen::VectorXd v = system.partialPivLu().solve(r_mu);
  return {v.data(), v.data() + v.size()};
}

std::vector<double> action_values(const TabularMdp& mdp, const std::vector<double>& v) {
  const std::size_t S = mdp.num_states();
  const std::size_t A = mdp.num_actions();
  if (v.size() != S) throw InputError("value table has the wrong size");
  std::vector<double> q(S * A);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      double expect = 0.0;
      for (std::size_t n = 0; n < S; ++n) expect += mdp.transition(s, a, n) * v[n];
      q[s * A + a] = mdp.reward(s, a) + mdp.gamma() * expect;
    }
  return q;
}

double bellman_residual(const TabularMdp& mdp, const std::vector<double>& v) {
  const auto q = action_values(mdp, v);
  double worst = 0.0;
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    double backup = 0.0;
    for (std::size_t a = 0; a < mdp.num_actions(); ++a)
      backup += mdp.policy(s, a) * q[s * mdp.num_actions() + a];
    worst = std::max(worst, std::abs(v[s] - backup));
  }
  return worst;
}

SoftValues soft_value(const TabularMdp& mdp, double beta, double tolerance,
                      std::size_t max_iterations) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive");
  const std::size_t S = mdp.num_states();
  const std::size_t A = mdp.num_actions();
  SoftValues out;
  out.v.assign(S, 0.0);
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    out.q = action_values(mdp, out.v);
    double change = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < A; ++a)
        if (mdp.policy(s, a) > 0.0) top = std::max(top, out.q[s * A + a]);
      double acc = 0.0;
      for (std::size_t a = 0; a < A; ++a)
        if (mdp.policy(s, a) > 0.0) acc += mdp.policy(s, a) * std::exp((out.q[s * A + a] - top) / beta);
      const double v = top + beta * std::log(acc);
      change = std::max(change, std::abs(v - out.v[s]));
      out.v[s] = v;
    }
    out.iterations = it;
    if (change < tolerance) break;
  }
  out.q = action_values(mdp, out.v);
  return out;
}

std::vector<double> stationary_distribution(const TabularMdp& mdp, double tolerance,
                                            std::size_t max_iterations) {
  Eigen::VectorXd r_mu;
  Eigen::MatrixXd p_mu;
  behavior_model(mdp, r_mu, p_mu);
  const auto S = static_cast<Eigen::Index>(mdp.num_states());
  // Lazy chain (I + P)/2: same stationary law, aperiodic.
  const Eigen::MatrixXd lazy = 0.5 * (Eigen::MatrixXd::Identity(S, S) + p_mu);
  Eigen::RowVectorXd d = Eigen::RowVectorXd::Constant(S, 1.0 / static_cast<double>(S));
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const Eigen::RowVectorXd next = d * lazy;
    const double change = (next - d).cwiseAbs().maxCoeff();
    d = next;
    if (change < tolerance) break;
  }
  return {d.data(), d.data() + d.size()};
}

// ---------------------------------------------------------------------------
// Datasets

DatasetMode parse_dataset_mode(std::string_view name) {
  if (name == "exhaustive") return DatasetMode::Exhaustive;
  if (name == "rollout") return DatasetMode::Rollout;
  throw ConfigError("unknown dataset mode '" + std::string(name) + "' (expected exhaustive or rollout)");
}

OfflineDataset exhaustive_dataset(const TabularMdp& mdp, std::size_t size) {
  const std::size_t S = mdp.num_states();
  const std::size_t A = mdp.num_actions();
  struct Cell {
    std::size_t s, a, next;
    double exact;
    std::size_t count;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t n = 0; n < S; ++n) {
        const double w = mdp.policy(s, a) * mdp.transition(s, a, n) / static_cast<double>(S);
        if (w > 0.0) {
          const double exact = w * static_cast<double>(size);
          // 1e-9 absorbs products like (1/3)*600 = 199.99999999999997
          const auto floor_count = static_cast<std::size_t>(std::floor(exact + 1e-9));
          cells.push_back({s, a, n, exact, floor_count});
        }
      }
  std::size_t assigned = 0;
  for (const auto& c : cells) assigned += c.count;
  // Largest remainder, ties broken by enumeration order.
  std::vector<std::size_t> order(cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return cells[i].exact - static_cast<double>(cells[i].count) >
           cells[j].exact - static_cast<double>(cells[j].count);
  });
  for (std::size_t k = 0; assigned < size && k < order.size(); ++k, ++assigned) ++cells[order[k]].count;

  OfflineDataset out{S, A, {}};
  out.transitions.reserve(size);
  for (const auto& c : cells) {
    if (c.count == 0)
      throw InputError("dataset size " + std::to_string(size) + " is too small to cover (s=" +
                       std::to_string(c.s) + ", a=" + std::to_string(c.a) + ", s'=" +
                       std::to_string(c.next) + ")");
    for (std::size_t k = 0; k < c.count; ++k)
      out.transitions.push_back({c.s, c.a, mdp.reward(c.s, c.a), c.next});
  }
  return out;
}

namespace {

std::size_t draw(Rng& rng, std::size_t n, auto prob) {
  const double u = rng.uniform_open();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = prob(i);
    if (p <= 0.0) continue;
    last = i;
    acc += p;
    if (u < acc) return i;
  }
  return last;  // rounding: u beyond the accumulated mass
}

}  // namespace

OfflineDataset rollout_dataset(const TabularMdp& mdp, std::size_t size, std::size_t horizon,
                               Rng& rng, std::size_t start_state) {
  if (horizon == 0) throw ConfigError("rollout horizon must be positive");
  if (start_state >= mdp.num_states()) throw ConfigError("start state out of range");
  const std::size_t S = mdp.num_states();
  const std::size_t A = mdp.num_actions();
  OfflineDataset out{S, A, {}};
  out.transitions.reserve(size);
  std::size_t s = start_state;
  for (std::size_t t = 0; t < size; ++t) {
    if (t > 0 && t % horizon == 0) s = start_state;
    const std::size_t a = draw(rng, A, [&](std::size_t i) { return mdp.policy(s, i); });
    const std::size_t n = draw(rng, S, [&](std::size_t i) { return mdp.transition(s, a, i); });
    out.transitions.push_back({s, a, mdp.reward(s, a), n});
    s = n;
  }
  return out;
}

}  // namespace mxql
