// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mxql/cli.hpp"
#include "mxql/csv.hpp"
#include "mxql/distributions.hpp"
#include "mxql/error.hpp"
#include "mxql/grid.hpp"
#include "mxql/kernels.hpp"
#include "mxql/key_value.hpp"
#include "mxql/losses.hpp"
#include "mxql/manifest.hpp"
#include "mxql/mdp.hpp"
#include "mxql/parallel.hpp"
#include "mxql/regression.hpp"
#include "mxql/stats.hpp"
#include "mxql/value_learning.hpp"

#ifndef MXQL_VERSION
#define MXQL_VERSION "0.0.0"
#endif

namespace mxql::cli {
namespace {

// ---------------------------------------------------------------------------
// Shared plumbing

struct Common {
  std::uint64_t seed = kDefaultSeed;
  std::string out;
  std::string isa;
  std::string config;  // consumed before parsing; kept so --config is accepted
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  sub->add_option("--out,-o", c.out, "Output CSV (stdout when omitted); a .manifest is written beside it");
  sub->add_option("--isa", c.isa, "Force kernel instruction set")->check(CLI::IsMember({"scalar", "avx2"}));
  sub->add_option("--config", c.config, "key=value file; command-line flags win");
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (const auto& x : xs) {
    if (!s.empty()) s += ',';
    if constexpr (std::is_floating_point_v<T>) {
      s += format_double(x);
    } else if constexpr (std::is_arithmetic_v<T>) {
      s += std::to_string(x);
    } else {
      s += x;
    }
  }
  return s;
}

std::vector<std::string> split_names(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string_view::npos ? text.size() : comma;
    if (end == start) throw ConfigError("empty entry in list '" + std::string(text) + "'");
    out.emplace_back(text.substr(start, end - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::size_t> parse_count_list(std::string_view text) {
  std::vector<std::size_t> out;
  for (int v : parse_int_list(text)) {
    if (v <= 0) throw ConfigError("counts must be positive, got " + std::to_string(v));
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot open '" + path + "' for writing");
  f << text;
  f.close();
  if (!f) throw InputError("failed writing '" + path + "'");
}

void apply_isa(const Common& c) {
  if (!c.isa.empty()) kernels::set_isa(kernels::parse_isa(c.isa));
}

/// Writes `csv` to `path` (or `out` when empty) plus its manifest.
void emit(const std::string& path, std::ostream& out, const std::string& csv,
          const std::string& subcommand, const Common& c, KeyValues config) {
  if (path.empty()) {
    out << csv;
    return;
  }
  config.emplace_back("isa", std::string(kernels::isa_name(kernels::active_isa())));
  RunManifest m{subcommand, std::move(config), c.seed, MXQL_VERSION,
                {std::filesystem::path(path).filename().string()}};
  std::ostringstream text;
  write_manifest(text, m);
  write_text_file(path, csv);
  write_text_file(manifest_path(path), text.str());
}

struct LossOptions {
  std::string losses;
  std::string orders;
  double beta = 1.0;
  double clip = 7.0;
  double tau = 0.7;
};

void add_loss_options(CLI::App* sub, LossOptions& o, bool single) {
  sub->add_option(single ? "--loss" : "--loss,--losses", o.losses,
                  single ? "Loss family: gumbel, clipped, expanded, l2, expectile"
                         : "Comma list of loss families: gumbel, clipped, expanded, l2, expectile")
      ->capture_default_str();
  sub->add_option("--orders,--order", o.orders, "Expansion orders (even, >= 2) for the expanded family")
      ->capture_default_str();
  sub->add_option("--beta", o.beta, "Temperature")->capture_default_str();
  sub->add_option("--clip", o.clip, "Clip bound of the clipped family")->capture_default_str();
  sub->add_option("--tau", o.tau, "Expectile level")->capture_default_str();
}

/// One spec per family, one per order for the expanded family.
std::vector<LossSpec> build_specs(const LossOptions& o) {
  std::vector<LossSpec> specs;
  const auto orders = parse_int_list(o.orders);
  for (const auto& name : split_names(o.losses)) {
    switch (parse_loss_variant(name)) {
      case LossVariant::Gumbel: specs.push_back(LossSpec::gumbel(o.beta)); break;
      case LossVariant::ClippedGumbel: specs.push_back(LossSpec::clipped_gumbel(o.beta, o.clip)); break;
      case LossVariant::L2: specs.push_back(LossSpec::l2(o.beta)); break;
      case LossVariant::Expectile: specs.push_back(LossSpec::expectile(o.tau)); break;
      case LossVariant::ExpandedGumbel:
        for (int n : orders) specs.push_back(LossSpec::expanded(o.beta, n));
        break;
    }
  }
  return specs;
}

KeyValues loss_config(const LossOptions& o) {
  return {{"losses", o.losses}, {"orders", o.orders}, {"beta", format_double(o.beta)},
          {"clip", format_double(o.clip)}, {"tau", format_double(o.tau)}};
}

// ---------------------------------------------------------------------------
// loss-curve

struct LossCurveCmd {
  Common common;
  LossOptions loss{"gumbel,expanded", "2,4,8"};
  std::string grid = "-3:3:0.01";

  void setup(CLI::App* sub) {
    add_common(sub, common);
    add_loss_options(sub, loss, false);
    sub->add_option("--grid", grid, "Residual grid lo:hi:step")->capture_default_str();
  }

  void run(std::ostream& out) {
    apply_isa(common);
    const Grid g = parse_grid(grid);
    const auto specs = build_specs(loss);
    const auto points = g.points();
    std::ostringstream csv_text;
    CsvWriter csv(csv_text, {"curve", "variant", "order", "beta", "residual", "loss"});
    for (const auto& spec : specs) {
      for (const auto& p : loss_curve(spec, points)) {
        csv.add(spec.label()).add(spec.name()).add(spec.order()).add(spec.beta()).add(p.residual).add(p.loss);
        csv.end_row();
      }
    }
    auto cfg = loss_config(loss);
    cfg.emplace_back("grid", grid);
    emit(common.out, out, csv_text.str(), "loss-curve", common, std::move(cfg));
  }
};

// ---------------------------------------------------------------------------
// err-dist

struct ErrDistCmd {
  Common common;
  LossOptions loss{"gumbel,expanded", "2,4,8,12,16"};
  std::string grid;
  double tail = 1e-12;

  void setup(CLI::App* sub) {
    add_common(sub, common);
    add_loss_options(sub, loss, false);
    sub->add_option("--grid", grid, "Residual grid lo:hi:step (default -40b:10b:0.01b)");
    sub->add_option("--tail", tail, "Largest exp(-loss) allowed at the grid ends")->capture_default_str();
  }

  void run(std::ostream& out) {
    apply_isa(common);
    const Grid g = grid.empty() ? Grid{-40.0 * loss.beta, 10.0 * loss.beta, 0.01 * loss.beta} : parse_grid(grid);
    g.validate();
    DensityOptions opt;
    opt.tail_threshold = tail;
    const auto specs = build_specs(loss);
    std::ostringstream csv_text;
    CsvWriter csv(csv_text, {"curve", "variant", "order", "beta", "z", "density", "normalizer", "integral"});
    auto cfg = loss_config(loss);
    cfg.emplace_back("grid", format_double(g.lo) + ":" + format_double(g.hi) + ":" + format_double(g.step));
    cfg.emplace_back("tail", format_double(tail));
    for (const auto& spec : specs) {
      const DensityCurve curve = implied_error_density(spec, g, opt);
      const double integral = curve.integral();
      for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        csv.add(spec.label()).add(spec.name()).add(spec.order()).add(spec.beta());
        csv.add(curve.grid[i]).add(curve.density[i]).add(curve.normalizer).add(integral);
        csv.end_row();
      }
      cfg.emplace_back("normalizer." + spec.label(), format_double(curve.normalizer));
    }
    emit(common.out, out, csv_text.str(), "err-dist", common, std::move(cfg));
  }
};

// ---------------------------------------------------------------------------
// regress

struct RegressCmd {
  Common common;
  LossOptions loss{"gumbel", "4"};
  std::string betas_data = "0.5,2,10";
  std::string betas_reg = "0.5,2,10";
  RegressionConfig cfg;
  std::string checkpoints = "10,100,500,1000,2000";
  std::string target = "minimizer";
  bool fixed_dataset = false;
  unsigned threads = 0;

  void setup(CLI::App* sub) {
    add_common(sub, common);
    sub->add_option("--loss", loss.losses, "Loss family")->capture_default_str();
    sub->add_option("--order", loss.orders, "Expansion order for --loss expanded")->capture_default_str();
    sub->add_option("--clip", loss.clip, "Clip bound of the clipped family")->capture_default_str();
    sub->add_option("--tau", loss.tau, "Expectile level")->capture_default_str();
    sub->add_option("--beta-data", betas_data, "beta_data values")->capture_default_str();
    sub->add_option("--beta-reg,--beta", betas_reg, "beta_reg values")->capture_default_str();
    sub->add_option("--lr", cfg.lr, "SGD learning rate")->capture_default_str();
    sub->add_option("--batch-size", cfg.batch_size, "Minibatch size")->capture_default_str();
    sub->add_option("--n-data", cfg.n_data, "Samples per dataset")->capture_default_str();
    sub->add_option("--repeats", cfg.repeats, "Repeats per cell")->capture_default_str();
    sub->add_option("--checkpoints", checkpoints, "Ascending update counts")->capture_default_str();
    sub->add_option("--h-init", cfg.h_init, "Initial estimate")->capture_default_str();
    sub->add_option("--target", target, "minimizer or caption")->capture_default_str();
    sub->add_option("--escape-margin", cfg.escape_margin, "Collapse box margin in data spans (inf disables)")
        ->capture_default_str();
    sub->add_flag("--fixed-dataset", fixed_dataset, "Share one dataset across repeats");
    sub->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
  }

  void run(std::ostream& out) {
    apply_isa(common);
    const auto specs = build_specs(loss);
    if (specs.size() != 1) throw ConfigError("regress takes exactly one loss and one order");
    cfg.loss = specs.front();
    cfg.master_seed = common.seed;
    cfg.checkpoints = parse_count_list(checkpoints);
    cfg.target = parse_target_kind(target);
    cfg.resample_per_repeat = !fixed_dataset;
    const auto bd = parse_double_list(betas_data);
    const auto br = parse_double_list(betas_reg);
    RegressionConfig probe = cfg;
    probe.beta_data = bd.front();
    probe.beta_reg = br.front();
    probe.loss = cfg.loss.with_beta(br.front());
    probe.validate();

    const auto traces = run_experiment(cfg, bd, br, threads);
    std::ostringstream csv_text;
    write_regression_csv(csv_text, traces);
    KeyValues kv{{"loss", std::string(cfg.loss.name())},
                 {"order", std::to_string(cfg.loss.order())},
                 {"clip", format_double(loss.clip)},
                 {"tau", format_double(loss.tau)},
                 {"beta_data", join(bd)},
                 {"beta_reg", join(br)},
                 {"lr", format_double(cfg.lr)},
                 {"batch_size", std::to_string(cfg.batch_size)},
                 {"n_data", std::to_string(cfg.n_data)},
                 {"repeats", std::to_string(cfg.repeats)},
                 {"checkpoints", join(cfg.checkpoints)},
                 {"h_init", format_double(cfg.h_init)},
                 {"target", std::string(target_kind_name(cfg.target))},
                 {"escape_margin", format_double(cfg.escape_margin)},
                 {"dataset", fixed_dataset ? "shared" : "per_repeat"},
                 {"sampling", "with_replacement"}};
    emit(common.out, out, csv_text.str(), "regress", common, std::move(kv));
  }
};

// ---------------------------------------------------------------------------
// mdp-train

struct MdpTrainCmd {
  Common common;
  LossOptions loss{"expanded", "2,4,8,12,20"};
  std::string mdp_name;
  std::string mdp_file;
  std::string mode = "auto";
  std::string q_mode = "closed";
  std::string dataset_mode = "exhaustive";
  std::size_t dataset_size = 0;
  std::size_t horizon = 100;
  TrainConfig train_cfg;
  double lr_v = 0.0;
  unsigned threads = 0;
  std::string trace_out;
  std::string tables_out;

  void setup(CLI::App* sub) {
    add_common(sub, common);
    std::string zoo;
    for (const auto& n : zoo_names()) zoo += (zoo.empty() ? "" : ", ") + n;
    sub->add_option("--mdp", mdp_name, "Built-in MDP (" + zoo + ")");
    sub->add_option("--mdp-file", mdp_file, "MDP definition file")->excludes("--mdp");
    sub->add_option("--loss", loss.losses, "Loss family for the V step")->capture_default_str();
    sub->add_option("--orders,--order", loss.orders, "Expansion orders to sweep")->capture_default_str();
    sub->add_option("--beta", loss.beta, "Temperature of the loss and the soft-value oracle")
        ->capture_default_str();
    sub->add_option("--clip", loss.clip, "Clip bound of the clipped family")->capture_default_str();
    sub->add_option("--tau", loss.tau, "Expectile level")->capture_default_str();
    sub->add_option("--mode", mode, "V step: auto (closed for n=2), closed, gradient")
        ->check(CLI::IsMember({"auto", "closed", "gradient"}))
        ->capture_default_str();
    sub->add_option("--q-mode", q_mode, "Q step: closed or gradient")
        ->check(CLI::IsMember({"closed", "gradient"}))
        ->capture_default_str();
    sub->add_option("--dataset", dataset_mode, "exhaustive or rollout")->capture_default_str();
    sub->add_option("--dataset-size", dataset_size, "Transitions (0 = 600 per state)")->capture_default_str();
    sub->add_option("--horizon", horizon, "Rollout restart period")->capture_default_str();
    sub->add_option("--v-steps", train_cfg.v_steps, "V gradient steps per iteration")->capture_default_str();
    sub->add_option("--q-steps", train_cfg.q_steps, "Q gradient steps per iteration")->capture_default_str();
    sub->add_option("--lr-v", lr_v, "V learning rate (0 = 0.1 beta^2)")->capture_default_str();
    sub->add_option("--lr-q", train_cfg.lr_q, "Q learning rate")->capture_default_str();
    sub->add_option("--max-iter", train_cfg.outer_iterations, "Outer iterations")->capture_default_str();
    sub->add_option("--tol", train_cfg.tolerance, "Stop when max |dV| falls below")->capture_default_str();
    sub->add_option("--escape-margin", train_cfg.escape_margin, "V collapse box margin (inf disables)")
        ->capture_default_str();
    sub->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
    sub->add_option("--trace-out", trace_out, "Per-iteration trace CSV");
    sub->add_option("--tables-out", tables_out, "Final V and Q tables CSV");
  }

  void run(std::ostream& out) {
    apply_isa(common);
    if (mdp_name.empty() == mdp_file.empty()) throw ConfigError("give exactly one of --mdp or --mdp-file");
    const TabularMdp mdp = mdp_file.empty() ? zoo_mdp(mdp_name) : load_mdp_file(mdp_file);
    const auto specs = build_specs(loss);
    const std::size_t size = dataset_size ? dataset_size : 600 * mdp.num_states();
    OfflineDataset data;
    if (parse_dataset_mode(dataset_mode) == DatasetMode::Exhaustive) {
      data = exhaustive_dataset(mdp, size);
    } else {
      Rng rng(common.seed, 0);
      data = rollout_dataset(mdp, size, horizon, rng);
    }

    std::vector<TrainConfig> configs;
    for (const auto& spec : specs) {
      TrainConfig c = train_cfg;
      c.loss = spec;
      c.q_mode = parse_q_mode(q_mode);
      const bool n2 = spec.order() == 2 && spec.variant() != LossVariant::ClippedGumbel;
      c.v_mode = mode == "closed" || (mode == "auto" && n2) ? VMode::ClosedFormN2 : VMode::Gradient;
      if (lr_v > 0.0) c.lr_v = lr_v;
      c.validate();
      configs.push_back(c);
    }

    const auto v_mu = behavior_value(mdp);
    const auto v_star = soft_value(mdp, loss.beta).v;
    std::vector<TrainResult> results(configs.size());
    parallel_for(configs.size(), threads, [&](std::size_t i) { results[i] = train(mdp, data, configs[i]); });

    std::ostringstream csv_text;
    CsvWriter csv(csv_text, {"mdp", "loss_variant", "order", "beta", "state", "v_learned", "v_behavior",
                             "v_soft", "gap_behavior", "gap_soft", "converged", "iterations", "diverged"});
    for (std::size_t i = 0; i < configs.size(); ++i) {
      const auto& t = results[i].tables;
      const auto& spec = configs[i].loss;
      for (std::size_t s = 0; s < mdp.num_states(); ++s) {
        std::optional<double> v;
        std::optional<double> gap_mu;
        std::optional<double> gap_star;
        if (!t.diverged) {
          v = t.v[s];
          gap_mu = std::abs(t.v[s] - v_mu[s]);
          gap_star = std::abs(t.v[s] - v_star[s]);
        }
        csv.add(mdp.name()).add(spec.name()).add(spec.order()).add(spec.beta()).add(s);
        csv.add(v).add(v_mu[s]).add(v_star[s]).add(gap_mu).add(gap_star);
        csv.add(std::size_t{t.converged}).add(t.iterations).add(std::size_t{t.diverged});
        csv.end_row();
      }
    }

    KeyValues kv = loss_config(loss);
    kv.emplace_back("mdp", mdp.name());
    kv.emplace_back("mode", mode);
    kv.emplace_back("q_mode", q_mode);
    kv.emplace_back("dataset", dataset_mode);
    kv.emplace_back("dataset_size", std::to_string(size));
    kv.emplace_back("horizon", std::to_string(horizon));
    kv.emplace_back("v_steps", std::to_string(train_cfg.v_steps));
    kv.emplace_back("q_steps", std::to_string(train_cfg.q_steps));
    kv.emplace_back("lr_v", lr_v > 0.0 ? format_double(lr_v) : "auto");
    kv.emplace_back("lr_q", format_double(train_cfg.lr_q));
    kv.emplace_back("max_iter", std::to_string(train_cfg.outer_iterations));
    kv.emplace_back("tol", format_double(train_cfg.tolerance));
    kv.emplace_back("escape_margin", format_double(train_cfg.escape_margin));
    kv.emplace_back("init", "zero");
    emit(common.out, out, csv_text.str(), "mdp-train", common, kv);

    if (!trace_out.empty()) {
      std::ostringstream text;
      CsvWriter trace(text, {"loss_variant", "order", "iteration", "max_change", "v_loss", "q_loss"});
      for (std::size_t i = 0; i < configs.size(); ++i)
        for (const auto& row : results[i].trace) {
          trace.add(configs[i].loss.name()).add(configs[i].loss.order());
          trace.add(row.iteration).add(row.max_change).add(row.v_loss).add(row.q_loss);
          trace.end_row();
        }
      emit(trace_out, out, text.str(), "mdp-train", common, kv);
    }
    if (!tables_out.empty()) {
      std::vector<std::string> header{"loss_variant", "order", "state", "v"};
      for (std::size_t a = 0; a < mdp.num_actions(); ++a) header.push_back("q_" + std::to_string(a));
      std::ostringstream text;
      CsvWriter tables(text, header);
      for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto& t = results[i].tables;
        for (std::size_t s = 0; s < mdp.num_states(); ++s) {
          tables.add(configs[i].loss.name()).add(configs[i].loss.order()).add(s).add(t.v[s]);
          for (std::size_t a = 0; a < mdp.num_actions(); ++a) tables.add(t.q[s * mdp.num_actions() + a]);
          tables.end_row();
        }
      }
      emit(tables_out, out, text.str(), "mdp-train", common, kv);
    }
  }
};

// ---------------------------------------------------------------------------
// compare

struct CompareCmd {
  Common common;
  std::string file_a;
  std::string file_b;
  bool pooled = false;
  double alpha = 0.05;

  void setup(CLI::App* sub) {
    add_common(sub, common);
    sub->add_option("a", file_a, "First regress CSV")->required();
    sub->add_option("b", file_b, "Second regress CSV")->required();
    sub->add_flag("--pooled", pooled, "Student's pooled-variance t-test instead of Welch");
    sub->add_option("--alpha", alpha, "Significance level reported in the 'significant' column")
        ->capture_default_str();
  }

  struct Cell {
    std::string variant;
    std::string order;
    std::size_t n = 0;
    std::optional<double> mean;
    std::optional<double> std;
  };

  using Key = std::tuple<double, double, double>;

  static std::map<Key, Cell> load(const std::string& path, std::vector<Key>* order) {
    const CsvTable t = read_csv_file(path);
    for (const auto& col : regression_csv_header())
      if (std::find(t.header.begin(), t.header.end(), col) == t.header.end())
        throw InputError("'" + path + "' is not a regress CSV (missing column '" + col + "')");
    const auto c_bd = t.column("cell_beta_data");
    const auto c_br = t.column("cell_beta_reg");
    const auto c_cp = t.column("checkpoint");
    const auto c_var = t.column("loss_variant");
    const auto c_ord = t.column("order");
    const auto c_mean = t.column("mean_abs_error");
    const auto c_std = t.column("std_abs_error");
    const auto c_div = t.column("diverged_count");
    const auto c_rep = t.column("repeats");
    auto number = [&](const std::vector<std::string>& row, std::size_t c) {
      const auto v = parse_optional_double(row[c]);
      if (!v) throw InputError("'" + path + "': missing value in column '" + t.header[c] + "'");
      return *v;
    };
    std::map<Key, Cell> out;
    for (const auto& row : t.rows) {
      const Key key{number(row, c_bd), number(row, c_br), number(row, c_cp)};
      const double repeats = number(row, c_rep);
      const double diverged = number(row, c_div);
      Cell cell{row[c_var], row[c_ord], static_cast<std::size_t>(repeats - diverged),
                parse_optional_double(row[c_mean]), parse_optional_double(row[c_std])};
      if (!out.emplace(key, cell).second) throw InputError("'" + path + "': duplicate cell row");
      if (order) order->push_back(key);
    }
    return out;
  }

  void run(std::ostream& out) {
    apply_isa(common);
    std::vector<Key> keys;
    const auto a = load(file_a, &keys);
    const auto b = load(file_b, nullptr);
    if (a.size() != b.size()) throw InputError("the two files cover different cells");
    const auto kind = pooled ? stats::TTestKind::Student : stats::TTestKind::Welch;

    std::ostringstream csv_text;
    CsvWriter csv(csv_text, {"cell_beta_data", "cell_beta_reg", "checkpoint", "variant_a", "order_a",
                             "variant_b", "order_b", "n_a", "mean_a", "std_a", "n_b", "mean_b", "std_b",
                             "t", "df", "p", "significant", "status"});
    for (const auto& key : keys) {
      const auto it = b.find(key);
      if (it == b.end())
        throw InputError("cell (" + format_double(std::get<0>(key)) + ", " + format_double(std::get<1>(key)) +
                         ", checkpoint " + format_double(std::get<2>(key)) + ") missing from '" + file_b + "'");
      const Cell& ca = a.at(key);
      const Cell& cb = it->second;
      csv.add(std::get<0>(key)).add(std::get<1>(key)).add(std::get<2>(key));
      csv.add(ca.variant).add(ca.order).add(cb.variant).add(cb.order);
      csv.add(ca.n).add(ca.mean).add(ca.std).add(cb.n).add(cb.mean).add(cb.std);
      if (ca.n < 2 || cb.n < 2 || !ca.std || !cb.std) {
        csv.add(std::optional<double>{}).add(std::optional<double>{}).add(std::optional<double>{});
        csv.add(std::string_view{}).add(std::string_view("diverged"));
      } else {
        const auto r = stats::t_test({ca.n, *ca.mean, *ca.std}, {cb.n, *cb.mean, *cb.std}, kind);
        csv.add(r.t).add(r.df).add(r.p).add(std::size_t{r.p < alpha});
        csv.add(std::string_view(r.degenerate ? "degenerate" : "ok"));
      }
      csv.end_row();
    }
    emit(common.out, out, csv_text.str(), "compare", common,
         {{"a", file_a}, {"b", file_b}, {"test", pooled ? "student" : "welch"}, {"alpha", format_double(alpha)}});
  }
};

// ---------------------------------------------------------------------------

/// Appends --key=value for every config-file key not given on the command line.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  std::set<std::string> given;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0) continue;
    const auto eq = a.find('=');
    const std::string name = a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
    given.insert(name);
    if (name == "config") path = eq == std::string::npos ? (i + 1 < args.size() ? args[i + 1] : "") : a.substr(eq + 1);
  }
  if (path.empty()) return args;
  std::vector<std::string> out = args;
  for (auto [key, value] : read_key_value_file(path)) {
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") throw ConfigError("config files cannot include other config files");
    if (!given.count(key)) out.push_back("--" + key + "=" + value);
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gumbel and expanded-Gumbel losses, regression and tabular value-learning experiments", "mxql"};
  app.set_version_flag("--version", MXQL_VERSION);
  app.require_subcommand(1);

  LossCurveCmd loss_curve_cmd;
  ErrDistCmd err_dist_cmd;
  RegressCmd regress_cmd;
  MdpTrainCmd mdp_train_cmd;
  CompareCmd compare_cmd;
  auto* s_loss = app.add_subcommand("loss-curve", "Loss values over a residual grid");
  auto* s_err = app.add_subcommand("err-dist", "Normalized implied error densities exp(-loss)/Z");
  auto* s_reg = app.add_subcommand("regress", "Scalar regression over a (beta_data, beta_reg) grid");
  auto* s_mdp = app.add_subcommand("mdp-train", "Tabular in-sample value learning against exact oracles");
  auto* s_cmp = app.add_subcommand("compare", "t-tests between two regress CSVs, cell by cell");
  loss_curve_cmd.setup(s_loss);
  err_dist_cmd.setup(s_err);
  regress_cmd.setup(s_reg);
  mdp_train_cmd.setup(s_mdp);
  compare_cmd.setup(s_cmp);

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const std::exception& e) {
    err << "mxql: error: " << e.what() << '\n';
    return kExitError;
  }

  try {
    if (*s_loss) loss_curve_cmd.run(out);
    if (*s_err) err_dist_cmd.run(out);
    if (*s_reg) regress_cmd.run(out);
    if (*s_mdp) mdp_train_cmd.run(out);
    if (*s_cmp) compare_cmd.run(out);
  } catch (const std::exception& e) {
    err << "mxql: error: " << e.what() << '\n';
    return kExitError;
  }
  return 0;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace mxql::cli
