// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Usage: acceptance [--data-dir <scenarios dir>]

#include "secure_game/orchestrator.hpp"
#include "secure_game/scenario.hpp"
#include "secure_game/suboptimal.hpp"

#include "../test_support.hpp"

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace sg = secure_game;

namespace {

struct Gate {
  int failures = 0;

  void report(int criterion, bool pass, double seconds, const std::string& detail) {
    std::printf("[%s] criterion %d (%5.1fs): %s\n", pass ? "PASS" : "FAIL", criterion, seconds,
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
  }
};

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(const char* format, ...) {
  va_list args;
  va_start(args, format);
  char buf[512];
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------- criterion 1
void matrix_game_properties(Gate& gate) {
  Timer timer;
  sg::Rng rng(987654321);
  int checked = 0;
  double worst_gap = 0.0;
  double worst_fp = 0.0;
  bool pass = true;
  for (int trial = 0; trial < 1000 && pass; ++trial) {
    const int m = 1 + static_cast<int>(rng.uniform() * 12);
    const int n = 1 + static_cast<int>(rng.uniform() * 12);
    sg::Matrix q(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) q(i, j) = -10.0 + 20.0 * rng.uniform();
    }
    const auto lp = sg::solve_zero_sum(q);
    const double lo = (q.transpose() * lp.f_star).minCoeff();
    const double hi = (q * lp.g_star).maxCoeff();
    if (lo < lp.value - 1e-8 || hi > lp.value + 1e-8 || lp.duality_gap > 1e-8) pass = false;
    worst_gap = std::max(worst_gap, lp.duality_gap);
    const auto fp = sg::solve_zero_sum_reference(q, 100000);
    worst_fp = std::max(worst_fp, std::abs(fp.value - lp.value));
    if (worst_fp > 0.05) pass = false;
    ++checked;
  }
  const double secs = timer.seconds();
  if (secs >= 30.0) pass = false;
  gate.report(1, pass, secs,
              fmt("saddle certificate and fictitious-play cross-check on %d random games "
                  "(worst gap %.2e, worst |lp-fp| %.3f)",
                  checked, worst_gap, worst_fp));
}

// ---------------------------------------------------------------- criterion 2
void control_synthesis(Gate& gate, const sg::ScenarioConfig& flagship) {
  Timer timer;
  const auto d = sg::discretize_zoh(flagship.A, flagship.B, flagship.Ts);
  sg::PlantModel plant;
  plant.A = d.A;
  plant.B = d.B;
  plant.C = flagship.C;
  plant.Q = flagship.Q;
  plant.R = flagship.R;
  plant.x0_mean = flagship.x0_mean;
  plant.x0_cov = flagship.x0_cov;
  plant.validate();
  const sg::LqgWeights weights{flagship.W, flagship.U};

  const sg::Matrix s = sg::solve_dare(plant.A, plant.B, weights.W, weights.U);
  auto residual = [](const sg::Matrix& a, const sg::Matrix& b, const sg::Matrix& qw,
                     const sg::Matrix& rw, const sg::Matrix& sol) {
    const sg::Matrix gram = b.transpose() * sol * b + rw;
    const sg::Matrix bsa = b.transpose() * sol * a;
    const sg::Matrix fs =
        a.transpose() * sol * a + qw - bsa.transpose() * sg::solve_linear(gram, bsa);
    return (sol - fs).cwiseAbs().maxCoeff();
  };
  const double control_resid = residual(plant.A, plant.B, weights.W, weights.U, s);

  const auto kd = sg::kalman_gain(plant);
  const double filter_resid =
      residual(plant.A.transpose(), plant.C.transpose(), plant.Q, plant.R, kd.P);

  const sg::Matrix lqr = sg::lqr_gain(plant, weights);
  const double rho_closed = sg::spectral_radius(plant.A + plant.B * lqr);
  const double rho_filter = sg::spectral_radius(plant.A - plant.A * kd.K * plant.C);

  const double secs = timer.seconds();
  const bool pass = control_resid <= 1e-10 && filter_resid <= 1e-10 && rho_closed < 1.0 &&
                    rho_filter < 1.0 && secs < 1.0;
  gate.report(2, pass, secs,
              fmt("batch reactor DARE residuals %.2e / %.2e, closed-loop rho %.3f, filter rho "
                  "%.3f",
                  control_resid, filter_resid, rho_closed, rho_filter));
}

// ---------------------------------------------------------------- criterion 3
void upper_bound_theorem(Gate& gate) {
  Timer timer;
  bool pass = true;
  double worst_slack = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto toy = sg::testing::make_toy_game(seed, 2);
    const auto result = sg::robust_value_iteration(toy.setup, toy.kernel, toy.initial);
    const double oracle = sg::testing::grid_game_value_k2(toy, 51);
    const double slack = result.v_bar[1] - oracle;
    worst_slack = std::min(worst_slack, slack);
    if (slack < -1e-9) pass = false;
  }
  const double secs = timer.seconds();
  if (secs >= 120.0) pass = false;
  gate.report(3, pass, secs,
              fmt("robust bound vs 51-point grid oracle on 20 toys, worst slack %.3e",
                  worst_slack));
}

// ---------------------------------------------------------------- criterion 4
void algorithm_agreement(Gate& gate) {
  Timer timer;
  bool pass = true;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto toy = sg::testing::make_toy_game(seed, 1);
    const auto subopt = sg::robust_value_iteration(toy.setup, toy.kernel, toy.initial);
    const auto mh = sg::run_moving_horizon(toy.setup, toy.kernel, toy.initial);
    for (int l = 0; l < 3; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      worst = std::max(worst,
                       std::abs(subopt.v_bar[lu] - mh.stages[0].solutions[lu].value));
      worst = std::max(worst, (subopt.stages[0][lu].f_star - mh.stages[0].solutions[lu].f_star)
                                  .cwiseAbs()
                                  .maxCoeff());
      worst = std::max(worst, (subopt.stages[0][lu].g_star - mh.stages[0].solutions[lu].g_star)
                                  .cwiseAbs()
                                  .maxCoeff());
    }
  }
  if (worst > 1e-9) pass = false;
  gate.report(4, pass, timer.seconds(),
              fmt("K=1 agreement of both algorithms on 20 toys, worst deviation %.2e", worst));
}

// ---------------------------------------------------------------- criterion 5
void complexity_claims(Gate& gate, const sg::ScenarioConfig& reduced) {
  Timer timer;
  bool pass = true;
  std::string detail;

  sg::ScenarioConfig cfg = reduced;
  cfg.kernel_trials = 4000;
  const sg::BuiltGame built = sg::build_game(cfg);
  const int mn = built.setup.num_attacks() * built.setup.num_subsystems();

  // Instrumented solve counts.
  const sg::TransitionKernel kernel = sg::obtain_kernel(cfg, built, nullptr);
  const auto mh = sg::run_moving_horizon(built.setup, kernel, built.initial);
  const long mh_expected = static_cast<long>(cfg.K - 1) * (mn + 3) + 3;
  if (mh.lp_solves != mh_expected || mh.lp_solves > static_cast<long>(cfg.K) * (mn + 3)) {
    pass = false;
  }
  const auto subopt = sg::robust_value_iteration(built.setup, kernel, built.initial);
  long subopt_expected = 0;
  long pow_mn = 1;
  for (int k = 0; k < cfg.K; ++k) {
    subopt_expected += 3 * pow_mn;
    pow_mn *= mn;
  }
  if (subopt.lp_solves != subopt_expected) pass = false;
  detail += fmt("solves mh %ld (= %ld <= K(MN+3) %ld), subopt %ld (= %ld); ", mh.lp_solves,
                mh_expected, static_cast<long>(cfg.K) * (mn + 3), subopt.lp_solves,
                subopt_expected);

  // Wall-clock shape: linear for the moving horizon, exponential for the
  // finite-horizon algorithm.
  const auto mh_rows = sg::run_scaling_benchmark(cfg, {50, 100}, {});
  const double mh_ratio = mh_rows[1].wall_seconds / mh_rows[0].wall_seconds;
  if (!(mh_ratio >= 1.3 && mh_ratio <= 3.0)) pass = false;
  detail += fmt("T_mh(100)/T_mh(50) = %.2f; ", mh_ratio);

  const auto so_rows = sg::run_scaling_benchmark(cfg, {}, {2, 3, 4, 5});
  for (std::size_t i = 0; i + 1 < so_rows.size(); ++i) {
    const double ratio = so_rows[i + 1].wall_seconds / so_rows[i].wall_seconds;
    if (!(ratio >= mn / 2.0)) pass = false;
    detail += fmt("T_so(%d)/T_so(%d) = %.1f; ", so_rows[i + 1].K, so_rows[i].K, ratio);
  }
  gate.report(5, pass, timer.seconds(), detail);
}

// ------------------------------------------------------------ criteria 6 + 7
void cost_ordering_and_parity(Gate& gate, const sg::ScenarioConfig& reduced) {
  Timer timer;
  const sg::RunReport report = sg::run_comparison(reduced);

  const sg::PolicyEvaluation* mh = nullptr;
  const sg::PolicyEvaluation* subopt = nullptr;
  const sg::PolicyEvaluation* always2 = nullptr;
  for (const auto& p : report.policies) {
    if (p.name == "moving_horizon") mh = &p;
    if (p.name == "suboptimal") subopt = &p;
    if (p.name == "always_subsystem_2") always2 = &p;
  }
  const double secs = timer.seconds();
  if (mh == nullptr || subopt == nullptr || always2 == nullptr) {
    gate.report(6, false, secs, "missing policies in the comparison report");
    gate.report(7, false, 0.0, "missing policies in the comparison report");
    return;
  }
  auto comb = [](double a, double b) { return std::sqrt(a * a + b * b); };
  const double m1 = subopt->mc_total_mean - mh->mc_total_mean;
  const double t1 = 2.0 * comb(subopt->mc_total_se, mh->mc_total_se);
  const double m2 = mh->mc_total_mean - always2->mc_total_mean;
  const double t2 = 2.0 * comb(mh->mc_total_se, always2->mc_total_se);
  const bool pass6 = m1 <= t1 && m2 <= t2 && secs < 600.0;
  gate.report(6, pass6, secs,
              fmt("cost ordering subopt %.2f <= mh %.2f <= always2 %.2f (margins %.2f vs %.2f, "
                  "%.2f vs %.2f)",
                  subopt->mc_total_mean, mh->mc_total_mean, always2->mc_total_mean, m1, t1, m2,
                  t2));

  const double parity = std::abs(mh->mode_prob.back()(0) - always2->mode_prob.back()(0));
  gate.report(7, parity <= 0.15, 0.0,
              fmt("final p_safe: moving horizon %.4f vs always-2 %.4f (|diff| %.4f <= 0.15)",
                  mh->mode_prob.back()(0), always2->mode_prob.back()(0), parity));
}

// ---------------------------------------------------------------- criterion 8
void replay_stealth(Gate& gate) {
  Timer timer;
  sg::PlantModel plant;
  plant.A = sg::Matrix::Constant(1, 1, 0.8);
  plant.B = sg::Matrix::Identity(1, 1);
  plant.C = sg::Matrix::Identity(1, 1);
  plant.Q = sg::Matrix::Constant(1, 1, 0.5);
  plant.R = sg::Matrix::Constant(1, 1, 0.5);
  plant.x0_mean = sg::Vector::Zero(1);
  plant.x0_cov = sg::Matrix::Identity(1, 1);
  plant.validate();
  const sg::LqgWeights weights{sg::Matrix::Identity(1, 1), sg::Matrix::Identity(1, 1)};
  const auto kalman = sg::kalman_gain(plant);
  const sg::Matrix lqr = sg::lqr_gain(plant, weights);
  const std::vector<sg::Subsystem> subsystems = {
      sg::make_subsystem(plant, lqr, kalman, sg::Matrix::Zero(1, 1), 0.05)};
  const double rho_curly = sg::spectral_radius(
      sg::Matrix((plant.A + plant.B * lqr) *
                 (sg::Matrix::Identity(1, 1) - kalman.K * plant.C)));

  const std::vector<sg::AttackAction> attacks = {sg::AttackAction::no_attack(),
                                                 sg::AttackAction::replay(40)};
  sg::KernelEstimationOptions opts;
  opts.n_trials = 100000;
  opts.burn_in = 200;
  opts.seed = 424242;
  const auto kernel = sg::estimate_transition_kernel(
      plant, subsystems, attacks, sg::EstimateWindow::constant_fill(plant, 40), opts);
  const double rate = kernel.prob(1, 0, sg::CyberMode::NoDetection, sg::CyberMode::Safe);
  const double se = std::sqrt(0.05 * 0.95 / opts.n_trials);
  const bool pass = rho_curly < 1.0 && rate >= 0.05 - 3.0 * se && rate <= 0.05 + 3.0 * se;
  gate.report(8, pass, timer.seconds(),
              fmt("zero-watermark replay detection %.5f within alpha 0.05 +- %.5f "
                  "(rho((A+BL)(I-KC)) = %.3f)",
                  rate, 3.0 * se, rho_curly));
}

// ---------------------------------------------------------------- criterion 9
void structural_invariants(Gate& gate, const sg::ScenarioConfig& reduced) {
  Timer timer;
  bool pass = true;
  std::string detail;

  sg::ScenarioConfig cfg = reduced;
  cfg.rollout_trials = 500;
  cfg.kernel_trials = 2000;
  const sg::BuiltGame built = sg::build_game(cfg);
  const sg::TransitionKernel kernel = sg::obtain_kernel(cfg, built, nullptr);
  try {
    kernel.validate();
  } catch (const std::exception& e) {
    pass = false;
    detail += fmt("kernel invalid: %s; ", e.what());
  }

  // Simplex validity of every strategy both algorithms emit, and payoff
  // nonnegativity along the moving-horizon trajectory.
  const auto mh = sg::run_moving_horizon(built.setup, kernel, built.initial);
  const auto subopt = sg::robust_value_iteration(built.setup, kernel, built.initial);
  auto on_simplex = [](const sg::Vector& v) {
    return std::abs(v.sum() - 1.0) <= 1e-9 && v.minCoeff() >= -1e-12;
  };
  for (const auto& stage : mh.stages) {
    for (int l = 0; l < 3; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      if (!on_simplex(stage.solutions[lu].f_star) || !on_simplex(stage.solutions[lu].g_star)) {
        pass = false;
      }
      if (stage.q[lu].minCoeff() < -1e-12) pass = false;
    }
  }
  for (const auto& stage : subopt.stages) {
    for (int l = 0; l < 3; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      if (!on_simplex(stage[lu].f_star) || !on_simplex(stage[lu].g_star)) pass = false;
    }
  }

  // R_K is nondecreasing in the horizon for a fixed extended sequence.
  const auto profiles = mh.profiles();
  double prev = 0.0;
  for (std::size_t k = 1; k <= profiles.size(); ++k) {
    const std::vector<sg::MixedStrategyProfile> prefix(profiles.begin(),
                                                       profiles.begin() + static_cast<long>(k));
    const double rk = sg::evaluate_total_payoff(built.setup, built.initial, prefix, kernel);
    if (rk < prev - 1e-9) pass = false;
    prev = rk;
  }

  // Byte-stable CSV emission under fixed seeds.
  const std::string dir_a = "acceptance_out/a";
  const std::string dir_b = "acceptance_out/b";
  sg::emit_plot_data(sg::run_comparison(cfg), dir_a);
  sg::emit_plot_data(sg::run_comparison(cfg), dir_b);
  for (const char* name :
       {"cost_series.csv", "mode_prob.csv", "strategy_series.csv", "stage_values.csv"}) {
    std::ifstream a(dir_a + "/" + name), b(dir_b + "/" + name);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    if (sa.str().empty() || sa.str() != sb.str()) {
      pass = false;
      detail += fmt("%s not byte-stable; ", name);
    }
  }

  const double secs = timer.seconds();
  if (secs >= 60.0) pass = false;
  gate.report(9, pass, secs,
              detail.empty() ? "kernel stochasticity, simplex strategies, monotone R_K, "
                               "nonnegative payoffs, byte-stable CSVs"
                             : detail);
}

}  // namespace

int main(int argc, char** argv) {
  std::string data_dir = "scenarios";
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--data-dir") == 0) data_dir = argv[i + 1];
  }

  sg::ScenarioConfig flagship;
  sg::ScenarioConfig reduced;
  try {
    flagship = sg::load_scenario(data_dir + "/batch_reactor.json");
    reduced = sg::load_scenario(data_dir + "/batch_reactor_k6.json");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cannot load scenario fixtures from %s: %s\n", data_dir.c_str(),
                 e.what());
    return 2;
  }

  Gate gate;
  matrix_game_properties(gate);
  control_synthesis(gate, flagship);
  upper_bound_theorem(gate);
  algorithm_agreement(gate);
  complexity_claims(gate, reduced);
  cost_ordering_and_parity(gate, reduced);
  replay_stealth(gate);
  structural_invariants(gate, reduced);

  if (gate.failures > 0) {
    std::printf("%d criterion(s) failed\n", gate.failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
