// Command-line front end: scenario comparison runs, wall-clock scaling
// benchmarks, transition-kernel estimation/caching and one-off matrix game
// solves. Exit codes: 0 success, 2 configuration/validation error, 3
// enumeration budget overrun.

#include "secure_game/orchestrator.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace sg = secure_game;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string algorithm;
  std::optional<long long> budget;
};

sg::ScenarioConfig load_with_overrides(const CommonArgs& args) {
  sg::ScenarioConfig cfg = sg::load_scenario(args.config_path);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.seed) cfg.seed = *args.seed;
  if (!args.algorithm.empty()) {
    if (args.algorithm != "mh" && args.algorithm != "subopt" && args.algorithm != "both") {
      throw sg::ValidationError({"--alg: must be mh, subopt or both"});
    }
    cfg.algorithm = args.algorithm;
  }
  if (args.budget) {
    if (*args.budget < 1) throw sg::ValidationError({"--budget: must be >= 1"});
    cfg.budget = *args.budget;
  }
  return cfg;
}

std::vector<int> parse_k_list(const std::string& csv, const char* flag) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  int prev = 0;
  while (std::getline(ss, item, ',')) {
    const int k = std::stoi(item);
    if (k < 1 || k <= prev) {
      throw sg::ValidationError({std::string(flag) + ": must be an ascending list of K >= 1"});
    }
    out.push_back(k);
    prev = k;
  }
  if (out.empty()) throw sg::ValidationError({std::string(flag) + ": empty list"});
  return out;
}

sg::Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sg::ParseError("solve: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw sg::ParseError("solve: ragged rows in " + path);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw sg::ParseError("solve: no data in " + path);
  sg::Matrix q(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      q(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return q;
}

int run_compare(const CommonArgs& args) {
  const sg::ScenarioConfig cfg = load_with_overrides(args);
  const sg::RunReport report = sg::run_comparison(cfg);
  sg::emit_plot_data(report, cfg.out_dir);
  sg::write_run_summary(report, cfg.out_dir);
  for (const auto& p : report.policies) {
    std::printf("%-20s mc_total=%.6g (se %.3g)  final p_safe=%.4f\n", p.name.c_str(),
                p.mc_total_mean, p.mc_total_se, p.mode_prob.back()(0));
  }
  if (report.moving_horizon.ran) {
    std::printf("moving_horizon: %.3fs, %ld LP solves, expected payoff %.6g\n",
                report.moving_horizon.wall_seconds, report.moving_horizon.lp_solves,
                report.moving_horizon.total_payoff);
  }
  if (report.suboptimal.ran) {
    std::printf("suboptimal: %.3fs, %ld LP solves, v_bar(NoDetection)=%.6g\n",
                report.suboptimal.wall_seconds, report.suboptimal.lp_solves,
                report.suboptimal.v_bar[1]);
  }
  std::printf("outputs in %s\n", cfg.out_dir.c_str());
  return 0;
}

int run_bench(const CommonArgs& args, const std::string& k_list, const std::string& k_list_sub) {
  sg::ScenarioConfig cfg = load_with_overrides(args);
  const auto mh_list = parse_k_list(k_list, "--k-list");
  const auto sub_list = parse_k_list(k_list_sub, "--k-list-subopt");
  sg::RunReport report;
  report.scaling = sg::run_scaling_benchmark(cfg, mh_list, sub_list);
  sg::emit_plot_data(report, cfg.out_dir);
  for (const auto& row : report.scaling) {
    std::printf("%-16s K=%-5d %.6fs  %ld solves\n", row.algorithm.c_str(), row.K,
                row.wall_seconds, row.lp_solves);
  }
  std::printf("outputs in %s\n", cfg.out_dir.c_str());
  return 0;
}

int run_kernel(const CommonArgs& args) {
  sg::ScenarioConfig cfg = load_with_overrides(args);
  const sg::BuiltGame built = sg::build_game(cfg);
  sg::KernelEstimationOptions opts;
  opts.n_trials = cfg.kernel_trials;
  opts.burn_in = cfg.kernel_burn_in;
  opts.inject_settle = cfg.inject_settle;
  opts.seed = cfg.seed;
  const auto kernel = sg::estimate_transition_kernel(
      built.setup.plant, built.setup.subsystems, built.setup.attacks, built.initial.window, opts);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/kernel.csv";
  sg::save_kernel_csv(kernel, path);
  std::printf("kernel written to %s\n", path.c_str());
  return 0;
}

int run_solve(const std::string& matrix_path) {
  const sg::Matrix q = read_matrix_csv(matrix_path);
  const auto sol = sg::solve_zero_sum(q);
  std::printf("value %.12g\nduality_gap %.3g\n", sol.value, sol.duality_gap);
  std::printf("f*");
  for (Eigen::Index i = 0; i < sol.f_star.size(); ++i) std::printf(" %.12g", sol.f_star(i));
  std::printf("\ng*");
  for (Eigen::Index j = 0; j < sol.g_star.size(); ++j) std::printf(" %.12g", sol.g_star(j));
  std::printf("\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid stochastic game switching policies for secure control"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string k_list = "20,50,100";
  std::string k_list_sub = "2,3,4,5";
  std::string matrix_path;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config) {
      cmd->add_option("--config", args.config_path, "scenario JSON path")->required();
    }
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", args.seed, "master seed (overrides config)");
    cmd->add_option("--budget", args.budget, "pure-history budget (overrides config)");
  };

  CLI::App* compare = app.add_subcommand("compare", "run algorithms and baselines");
  add_common(compare, true);
  compare->add_option("--alg", args.algorithm, "mh, subopt or both (overrides config)");

  CLI::App* bench = app.add_subcommand("bench", "wall-clock scaling sweep");
  add_common(bench, true);
  bench->add_option("--k-list", k_list, "moving-horizon stage counts, comma separated");
  bench->add_option("--k-list-subopt", k_list_sub, "finite-horizon stage counts");

  CLI::App* kernel = app.add_subcommand("kernel", "estimate and cache the transition kernel");
  add_common(kernel, true);

  CLI::App* solve = app.add_subcommand("solve", "solve one zero-sum matrix game from CSV");
  solve->add_option("--matrix", matrix_path, "CSV file with the payoff matrix")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (compare->parsed()) return run_compare(args);
    if (bench->parsed()) return run_bench(args, k_list, k_list_sub);
    if (kernel->parsed()) return run_kernel(args);
    if (solve->parsed()) return run_solve(matrix_path);
  } catch (const sg::BudgetExceededError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const sg::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const sg::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
