// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "mxql/error.hpp"
#include "mxql/value_learning.hpp"

namespace mxql {
namespace {

// One state, two actions with the given behavior weights, no discount:
// after a closed Q step Q equals the rewards.
TabularMdp one_state(double r0, double r1, double mu0 = 0.5) {
  return TabularMdp(1, 2, {1.0, 1.0}, {r0, r1}, {mu0, 1.0 - mu0}, 0.0);
}

OfflineDataset dataset_of(std::size_t states, std::size_t actions, std::vector<Transition> t) {
  return {states, actions, std::move(t)};
}

// Golden-section search for the minimizer of a unimodal function.
template <class F>
double golden_min(F f, double lo, double hi) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  for (int i = 0; i < 200; ++i) {
    const double c = b - g * (b - a);
    const double d = a + g * (b - a);
    if (f(c) < f(d)) b = d;
    else a = c;
  }
  return 0.5 * (a + b);
}

TEST(DatasetIndex, Weights) {
  const auto data = dataset_of(2, 2, {{0, 0, 1.0, 1}, {0, 0, 1.0, 1}, {0, 0, 2.0, 0}, {0, 1, 0.0, 0}, {1, 1, 3.0, 1}});
  const DatasetIndex idx(data);
  EXPECT_EQ(idx.size(), 5u);
  EXPECT_EQ(idx.count(0), 4u);
  EXPECT_EQ(idx.count(0, 0), 3u);
  EXPECT_EQ(idx.count(1, 0), 0u);
  ASSERT_EQ(idx.actions(0).size(), 2u);
  EXPECT_DOUBLE_EQ(idx.actions(0)[0].weight, 0.75);
  ASSERT_EQ(idx.actions(1).size(), 1u);
  EXPECT_EQ(idx.actions(1)[0].action, 1u);
  const auto& out = idx.outcomes(0, 0);
  ASSERT_EQ(out.size(), 2u);
  double total = 0.0;
  for (const auto& o : out) total += o.weight;
  EXPECT_DOUBLE_EQ(total, 1.0);
  EXPECT_THROW(DatasetIndex(dataset_of(1, 1, {{0, 1, 0.0, 0}})), InputError);
}

TEST(VStep, ClosedFormIsTheWeightedMean) {
  const auto data = dataset_of(1, 3, {{0, 0, 0, 0}, {0, 1, 0, 0}, {0, 1, 0, 0}, {0, 2, 0, 0}});
  const DatasetIndex idx(data);
  std::vector<double> v{0.0};
  const std::vector<double> q{1.0, 2.0, 7.0};
  v_step_closed_form(v, q, idx);
  EXPECT_DOUBLE_EQ(v[0], (1.0 + 2.0 * 2.0 + 7.0) / 4.0);
}

TEST(VStep, GumbelReachesTheLogMeanExp) {
  const auto data = dataset_of(1, 2, {{0, 0, 0, 0}, {0, 1, 0, 0}});
  const DatasetIndex idx(data);
  std::vector<double> v{0.0};
  const std::vector<double> q{0.0, 1.0};
  const auto rep = v_step(v, q, idx, LossSpec::gumbel(1.0), 0.5, 2000);
  EXPECT_FALSE(rep.diverged);
  EXPECT_NEAR(v[0], std::log((1.0 + std::numbers::e) / 2.0), 1e-12);
  EXPECT_NEAR(v[0], 0.6201145, 1e-7);
}

TEST(VStep, ExpandedLandsBetweenMeanAndLogMeanExp) {
  const auto data = dataset_of(1, 2, {{0, 0, 0, 0}, {0, 1, 0, 0}});
  const DatasetIndex idx(data);
  std::vector<double> v{0.0};
  const std::vector<double> q{0.0, 1.0};
  const auto spec = LossSpec::expanded(1.0, 8);
  v_step(v, q, idx, spec, 0.5, 2000);
  const double oracle = golden_min(
      [&](double h) { return 0.5 * (loss_value(spec, 0.0 - h) + loss_value(spec, 1.0 - h)); }, -1.0, 2.0);
  EXPECT_NEAR(v[0], oracle, 1e-8);
  EXPECT_GT(v[0], 0.5);
  EXPECT_LT(v[0], std::log((1.0 + std::numbers::e) / 2.0));
}

TEST(VStep, CollapseNamesTheState) {
  const auto data = dataset_of(2, 2, {{0, 0, 0, 0}, {1, 0, 0, 0}, {1, 1, 0, 0}});
  const DatasetIndex idx(data);
  std::vector<double> v{0.0, 0.0};
  const std::vector<double> q{0.0, 0.0, 0.0, 5.0};
  const auto rep = v_step(v, q, idx, LossSpec::gumbel(0.05), 1e-6, 1);
  EXPECT_TRUE(rep.diverged);
  EXPECT_NE(rep.message.find("state 1"), std::string::npos);
}

TEST(QStep, DeterministicAndStochasticTargets) {
  const auto data =
      dataset_of(2, 1, {{0, 0, 1.0, 1}, {1, 0, 0.0, 0}, {1, 0, 2.0, 1}, {1, 0, 2.0, 1}, {1, 0, 0.0, 0}});
  const DatasetIndex idx(data);
  const std::vector<double> v{10.0, -4.0};
  std::vector<double> q(2, 0.0);
  q_step(q, v, idx, 0.9, QMode::ClosedForm);
  EXPECT_DOUBLE_EQ(q[0], 1.0 + 0.9 * -4.0);
  EXPECT_NEAR(q[1], 0.5 * (0.0 + 0.9 * 10.0) + 0.5 * (2.0 + 0.9 * -4.0), 1e-12);

  std::vector<double> q0(2, 3.0);
  q_step(q0, v, idx, 0.0, QMode::ClosedForm);
  EXPECT_DOUBLE_EQ(q0[0], 1.0);
  EXPECT_DOUBLE_EQ(q0[1], 1.0);

  std::vector<double> qg(2, 0.0);
  q_step(qg, v, idx, 0.9, QMode::Gradient, 0.5, 200);
  EXPECT_NEAR(qg[0], q[0], 1e-12);
  EXPECT_NEAR(qg[1], q[1], 1e-12);
}

TEST(QStep, UnseenPairsAreUntouched) {
  const auto data = dataset_of(1, 2, {{0, 0, 1.0, 0}});
  const DatasetIndex idx(data);
  std::vector<double> q{0.0, 42.0};
  q_step(q, {0.0}, idx, 0.5, QMode::ClosedForm);
  EXPECT_EQ(q[0], 1.0);
  EXPECT_EQ(q[1], 42.0);
}

TrainConfig config_for(const LossSpec& loss) {
  TrainConfig c;
  c.loss = loss;
  if (loss.variant() == LossVariant::ExpandedGumbel && loss.order() == 2) c.v_mode = VMode::ClosedFormN2;
  return c;
}

TEST(Train, OrderTwoRecoversBehaviorValue) {
  for (const auto& name : zoo_names()) {
    const auto m = zoo_mdp(name);
    const auto data = exhaustive_dataset(m, 600 * m.num_states());
    const auto r = train(m, data, config_for(LossSpec::expanded(1.0, 2)));
    ASSERT_TRUE(r.tables.converged) << name;
    const auto vmu = behavior_value(m);
    for (std::size_t s = 0; s < m.num_states(); ++s) EXPECT_NEAR(r.tables.v[s], vmu[s], 1e-6) << name;
  }
}

TEST(Train, GradientModeAgreesWithClosedFormAtOrderTwo) {
  const auto m = zoo_mdp("chain3");
  const auto data = exhaustive_dataset(m, 1800);
  auto c = config_for(LossSpec::expanded(1.0, 2));
  c.v_mode = VMode::Gradient;
  const auto r = train(m, data, c);
  ASSERT_TRUE(r.tables.converged);
  const auto vmu = behavior_value(m);
  for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(r.tables.v[s], vmu[s], 1e-6);
}

TEST(Train, HighOrderApproachesSoftValue) {
  const auto m = zoo_mdp("risky5");
  const auto data = exhaustive_dataset(m, 3000);
  const auto vstar = soft_value(m, 1.0).v;
  auto gap = [&](int n) {
    const auto r = train(m, data, config_for(LossSpec::expanded(1.0, n)));
    EXPECT_TRUE(r.tables.converged) << n;
    double g = 0.0;
    for (std::size_t s = 0; s < m.num_states(); ++s) g = std::max(g, std::abs(r.tables.v[s] - vstar[s]));
    return g;
  };
  const double g20 = gap(20);
  EXPECT_LT(g20, gap(8));
  EXPECT_LT(g20, 1e-6);
}

TEST(Train, GumbelFixedPointIsTheSoftValue) {
  const auto m = zoo_mdp("chain3");
  const auto data = exhaustive_dataset(m, 1800);
  const auto r = train(m, data, config_for(LossSpec::gumbel(1.0)));
  ASSERT_TRUE(r.tables.converged);
  const auto vstar = soft_value(m, 1.0).v;
  for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(r.tables.v[s], vstar[s], 1e-6);
}

TEST(Train, OrderingAndMonotoneApproach) {
  for (const auto& name : zoo_names()) {
    const auto m = zoo_mdp(name);
    const auto data = exhaustive_dataset(m, 600 * m.num_states());
    for (double beta : {0.5, 1.0, 2.0}) {
      const auto vmu = behavior_value(m);
      const auto vstar = soft_value(m, beta).v;
      // Distance of a stopped iteration from its fixed point.
      const double solver = TrainConfig{}.tolerance * m.gamma() / (1.0 - m.gamma());
      double prev_gap = HUGE_VAL;
      for (int n : {2, 4, 8, 12, 20}) {
        const auto r = train(m, data, config_for(LossSpec::expanded(beta, n)));
        ASSERT_TRUE(r.tables.converged) << name << " n=" << n << " beta=" << beta;
        double gap = 0.0;
        for (std::size_t s = 0; s < m.num_states(); ++s) {
          EXPECT_GE(r.tables.v[s], vmu[s] - 1e-4) << name << " n=" << n;
          EXPECT_LE(r.tables.v[s], vstar[s] + 1e-4) << name << " n=" << n;
          gap = std::max(gap, std::abs(r.tables.v[s] - vstar[s]));
        }
        if (n >= 4) EXPECT_LE(gap, prev_gap + solver) << name << " n=" << n << " beta=" << beta;
        if (n >= 4) prev_gap = gap;
      }
    }
  }
}

TEST(Train, SmallTemperatureGumbelDivergesOrderFourDoesNot) {
  const auto m = one_state(0.0, 5.0);
  const auto data = exhaustive_dataset(m, 100);
  auto c = config_for(LossSpec::gumbel(0.05));
  c.lr_v = 1e-6;
  const auto g = train(m, data, c);
  EXPECT_TRUE(g.tables.diverged);
  EXPECT_FALSE(g.tables.divergence.empty());

  c.loss = LossSpec::expanded(0.05, 4);
  const auto e = train(m, data, c);
  EXPECT_FALSE(e.tables.diverged) << e.tables.divergence;
  EXPECT_TRUE(e.tables.converged);
  EXPECT_TRUE(std::isfinite(e.tables.v[0]));
}

TEST(Train, Deterministic) {
  const auto m = zoo_mdp("risky5");
  Rng a(9, 0), b(9, 0);
  const auto da = rollout_dataset(m, 2000, 100, a);
  const auto db = rollout_dataset(m, 2000, 100, b);
  auto c = config_for(LossSpec::expanded(1.0, 8));
  c.q_mode = QMode::Gradient;
  const auto ra = train(m, da, c);
  const auto rb = train(m, db, c);
  EXPECT_EQ(ra.tables.v, rb.tables.v);
  EXPECT_EQ(ra.tables.q, rb.tables.q);
  std::ostringstream ta, tb;
  write_trace_csv(ta, ra.trace);
  write_trace_csv(tb, rb.trace);
  EXPECT_EQ(ta.str(), tb.str());
}

TEST(Train, ConfigValidation) {
  TrainConfig c;
  c.loss = LossSpec::gumbel(1.0);
  c.v_mode = VMode::ClosedFormN2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  EXPECT_DOUBLE_EQ(c.resolved_lr_v(), 0.1);
  c.lr_v = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.v_steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_q_mode("newton"), ConfigError);
  EXPECT_EQ(parse_v_mode("closed"), VMode::ClosedFormN2);

  const auto m = zoo_mdp("chain3");
  const auto wrong = exhaustive_dataset(zoo_mdp("risky5"), 3000);
  EXPECT_THROW(train(m, wrong, TrainConfig{}), InputError);
}

TEST(Train, TablesCsv) {
  const auto m = one_state(1.0, 3.0);
  const auto r = train(m, exhaustive_dataset(m, 10), config_for(LossSpec::expanded(1.0, 2)));
  std::ostringstream out;
  write_tables_csv(out, r.tables, 2);
  EXPECT_EQ(out.str(), "state,v,q_0,q_1\n0,2,1,3\n");
}

}  // namespace
}  // namespace mxql
