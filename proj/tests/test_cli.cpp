// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mxql/cli.hpp"
#include "mxql/csv.hpp"

namespace mxql {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> rows_of(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  ADD_FAILURE() << "no column " << name;
  return 0;
}

class CliFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mxql_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }
  fs::path dir_;
};

TEST(Cli, LossCurveHasEveryCurve) {
  const auto r = run({"loss-curve", "--orders", "2,4,8", "--grid=-1:1:0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = rows_of(r.out);
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"curve", "variant", "order", "beta", "residual", "loss"}));
  std::set<std::string> curves;
  for (std::size_t i = 1; i < rows.size(); ++i) curves.insert(rows[i][0]);
  EXPECT_EQ(curves.size(), 4u);
  EXPECT_EQ(rows.size(), 1u + 4u * 5u);
}

TEST(Cli, RejectsOddOrder) {
  const auto r = run({"loss-curve", "--orders", "3"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("even"), std::string::npos);
}

TEST(Cli, UsageErrors) {
  EXPECT_NE(run({"nonsense"}).code, 0);
  EXPECT_NE(run({"loss-curve", "--beta"}).code, 0);
  EXPECT_EQ(run({"loss-curve", "--beta", "-1"}).code, 1);
  EXPECT_EQ(run({"loss-curve", "--grid", "1:0:0.1"}).code, 1);
  EXPECT_EQ(run({"mdp-train", "--mdp", "gridworld"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, ErrDistColumnsAndNormalization) {
  const auto r = run({"err-dist", "--orders", "2,8"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = rows_of(r.out);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"curve", "variant", "order", "beta", "z", "density", "normalizer",
                                               "integral"}));
  const auto integral = column(rows[0], "integral");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_NEAR(std::stod(rows[i][integral]), 1.0, 1e-6);
}

TEST(Cli, RegressShape) {
  const auto r = run({"regress", "--repeats", "4", "--n-data", "500", "--threads", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = rows_of(r.out);
  EXPECT_EQ(rows.size(), 1u + 9u * 5u);
  EXPECT_EQ(rows[0].size(), 10u);
}

TEST(Cli, MdpTrainClosedFormMatchesBehaviorValue) {
  const auto r = run({"mdp-train", "--mdp", "chain3", "--orders", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = rows_of(r.out);
  ASSERT_EQ(rows.size(), 4u);
  const auto gap = column(rows[0], "gap_behavior");
  const auto conv = column(rows[0], "converged");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LT(std::abs(std::stod(rows[i][gap])), 1e-6);
    EXPECT_EQ(rows[i][conv], "1");
  }
}

TEST(Cli, MdpTrainReportsDivergenceWithoutNumbers) {
  const auto r = run({"mdp-train", "--mdp", "bandit", "--loss", "gumbel", "--beta", "0.05", "--lr-v", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = rows_of(r.out);
  const auto div = column(rows[0], "diverged");
  const auto v = column(rows[0], "v_learned");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][div], "1");
  EXPECT_EQ(rows[1][v], "");
}

TEST(Cli, OrderFourRegressionNeverDiverges) {
  const auto r = run({"regress", "--loss", "expanded", "--order", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = rows_of(r.out);
  const auto div = column(rows[0], "diverged_count");
  const auto bd = column(rows[0], "cell_beta_data");
  const auto br = column(rows[0], "cell_beta_reg");
  for (std::size_t i = 1; i < rows.size(); ++i)
    EXPECT_EQ(rows[i][div], "0") << "cell " << rows[i][bd] << "," << rows[i][br];
}

TEST(Cli, MdpTrainGapShrinksWithOrder) {
  const auto r = run({"mdp-train", "--mdp", "risky5", "--orders", "4,8,12,20"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = rows_of(r.out);
  const auto order = column(rows[0], "order");
  const auto gap = column(rows[0], "gap_soft");
  std::map<int, double> worst;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    double& w = worst[std::stoi(rows[i][order])];
    w = std::max(w, std::stod(rows[i][gap]));
  }
  // Distance of a stopped iteration from its fixed point (tol 1e-10, gamma 0.9).
  const double solver = 1e-10 * 0.9 / 0.1;
  EXPECT_LE(worst[8], worst[4] + solver);
  EXPECT_LE(worst[12], worst[8] + solver);
  EXPECT_LE(worst[20], worst[12] + solver);
  EXPECT_LT(worst[20], worst[4]);
}

TEST_F(CliFiles, ManifestAndOutputs) {
  const auto out = path("curve.csv");
  ASSERT_EQ(run({"loss-curve", "--grid=-1:1:1", "--seed", "5", "--out", out}).code, 0);
  const auto manifest = slurp(out + ".manifest");
  EXPECT_NE(manifest.find("subcommand=loss-curve"), std::string::npos);
  EXPECT_NE(manifest.find("seed=5"), std::string::npos);
  EXPECT_NE(manifest.find("version="), std::string::npos);
  EXPECT_NE(manifest.find("outputs=curve.csv\n"), std::string::npos);
  EXPECT_FALSE(slurp(out).empty());
}

TEST_F(CliFiles, MdpSideOutputs) {
  const auto out = path("m.csv"), trace = path("t.csv"), tables = path("q.csv");
  ASSERT_EQ(run({"mdp-train", "--mdp", "bandit", "--orders", "4", "--out", out, "--trace-out", trace,
                 "--tables-out", tables})
                .code,
            0);
  EXPECT_TRUE(fs::exists(trace + ".manifest"));
  EXPECT_TRUE(fs::exists(tables + ".manifest"));
  EXPECT_TRUE(slurp(tables).starts_with("loss_variant,order,state,v,q_0,q_1,q_2\n"));
}

TEST_F(CliFiles, ConfigFileAndFlagPrecedence) {
  const auto cfg = path("run.cfg");
  std::ofstream(cfg) << "# defaults\nbeta = 3\norders = 2\ngrid = -1:1:1\n";
  const auto from_file = rows_of(run({"loss-curve", "--config", cfg}).out);
  const auto beta = column(from_file[0], "beta");
  EXPECT_EQ(from_file[1][beta], "3");
  const auto flag_wins = rows_of(run({"loss-curve", "--config", cfg, "--beta", "0.5"}).out);
  EXPECT_EQ(flag_wins[1][beta], "0.5");
  EXPECT_EQ(run({"loss-curve", "--config", path("missing.cfg")}).code, 1);
}

TEST_F(CliFiles, CompareWithItself) {
  const auto a = path("a.csv");
  ASSERT_EQ(run({"regress", "--repeats", "6", "--n-data", "300", "--beta-data", "2", "--beta-reg", "2", "--out", a})
                .code,
            0);
  const auto r = run({"compare", a, a});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = rows_of(r.out);
  ASSERT_EQ(rows.size(), 6u);
  const auto p = column(rows[0], "p");
  const auto sig = column(rows[0], "significant");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_DOUBLE_EQ(std::stod(rows[i][p]), 1.0);
    EXPECT_EQ(rows[i][sig], "0");
  }
}

TEST_F(CliFiles, CompareRejectsMismatchedCells) {
  const auto a = path("a.csv"), b = path("b.csv");
  ASSERT_EQ(run({"regress", "--repeats", "3", "--n-data", "200", "--beta-reg", "2", "--out", a}).code, 0);
  ASSERT_EQ(run({"regress", "--repeats", "3", "--n-data", "200", "--beta-reg", "10", "--out", b}).code, 0);
  const auto r = run({"compare", a, b});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("mxql: error:"), std::string::npos);
  EXPECT_EQ(run({"compare", a, path("none.csv")}).code, 1);
}

}  // namespace
}  // namespace mxql
