#pragma once

#include "secure_game/moving_horizon.hpp"
#include "secure_game/scenario.hpp"
#include "secure_game/suboptimal.hpp"
#include "secure_game/threads.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace secure_game {

/// System-side policy: per stage, per cyber mode, a distribution over
/// subsystems. The attacker side of an evaluation comes from the scenario
/// schedule.
struct Policy {
  std::string name;
  std::vector<std::array<Vector, 3>> g;  // [stage][mode]

  static Policy fixed(const std::string& name, int num_subsystems, int j, int stages) {
    Policy p;
    p.name = name;
    Vector g = Vector::Zero(num_subsystems);
    g(j) = 1.0;
    p.g.assign(static_cast<std::size_t>(stages), {g, g, g});
    return p;
  }

  template <typename Result>
  static Policy from_algorithm(const std::string& name, const Result& result) {
    Policy p;
    p.name = name;
    for (std::size_t k = 0; k < result.stages.size(); ++k) {
      const auto profile = result.profile_at(k);
      p.g.push_back(profile.g);
    }
    return p;
  }
};

/// Attacker strategies induced by the schedule: the classified pure action
/// at every stage, shared across modes (Safe-mode neutralization is applied
/// inside the game model).
inline std::vector<MixedStrategyProfile> schedule_profiles(const ScenarioConfig& cfg,
                                                           const GameSetup& setup,
                                                           const Policy& policy) {
  std::vector<MixedStrategyProfile> out;
  out.reserve(static_cast<std::size_t>(setup.K));
  for (int k = 0; k < setup.K; ++k) {
    MixedStrategyProfile profile;
    Vector f = Vector::Zero(setup.num_attacks());
    f(scheduled_action_index(cfg, k)) = 1.0;
    for (int l = 0; l < 3; ++l) {
      profile.f[static_cast<std::size_t>(l)] = f;
      profile.g[static_cast<std::size_t>(l)] = policy.g[static_cast<std::size_t>(k)]
                                                       [static_cast<std::size_t>(l)];
    }
    out.push_back(std::move(profile));
  }
  return out;
}

struct PolicyEvaluation {
  std::string name;
  std::vector<double> expected_cost;              // game-payoff measure, per stage
  std::vector<Eigen::Vector3d> mode_prob;         // kernel-propagated, k = 0..K
  std::vector<double> mc_stage_cost;              // Monte Carlo mean true-state cost
  double mc_total_mean = 0.0;
  double mc_total_se = 0.0;
  double mc_final_p_safe = 0.0;                   // empirical share of Safe trials at the end
};

/// Deterministic pipeline: propagate the hybrid state under (schedule
/// attacker, policy system) and record the payoff and mode series.
inline void evaluate_expected(const ScenarioConfig& cfg, const GameSetup& setup,
                              const TransitionKernel& kernel, const HybridGameState& initial,
                              const Policy& policy, PolicyEvaluation* out) {
  HybridGameState state = initial;
  const auto profiles = schedule_profiles(cfg, setup, policy);
  out->mode_prob.push_back(state.mode_dist);
  for (int k = 0; k < setup.K; ++k) {
    const StagePayoffs payoffs = build_stage_payoff(setup, state.window);
    out->expected_cost.push_back(
        expected_stage_payoff(payoffs, state.mode_dist, profiles[static_cast<std::size_t>(k)]));
    state = update_with_strategies(setup, state, profiles[static_cast<std::size_t>(k)], kernel);
    out->mode_prob.push_back(state.mode_dist);
  }
}

/// Monte Carlo rollouts under the literal schedule: sampled noise,
/// sampled subsystem switches, chi-squared alarms driving the mode chain.
/// Per-stage cost is the true-state quadratic x^T W x + u^T U u (p_f at
/// FalseAlarm stages); noise streams depend only on (seed, trial) so every
/// policy sees common random numbers.
inline void evaluate_rollouts(const ScenarioConfig& cfg, const GameSetup& setup,
                              const Policy& policy, PolicyEvaluation* out) {
  const auto& plant = setup.plant;
  const int stages = setup.K;
  const int trials = cfg.rollout_trials;
  const Matrix chol_x0 = cholesky_psd(plant.x0_cov);
  const Matrix chol_q = cholesky_psd(plant.Q);
  const Matrix chol_r = cholesky_psd(plant.R);
  std::vector<AttackAction> stage_attack;
  for (int k = 0; k < stages; ++k) stage_attack.push_back(scheduled_action(cfg, k));
  std::vector<LuDecomposition> pz_lu;
  pz_lu.reserve(setup.subsystems.size());
  for (const auto& sub : setup.subsystems) pz_lu.emplace_back(sub.innovation_cov);

  std::vector<double> totals(static_cast<std::size_t>(trials), 0.0);
  std::vector<double> stage_sum(static_cast<std::size_t>(trials) * stages, 0.0);
  std::vector<std::uint8_t> safe_at_end(static_cast<std::size_t>(trials), 0);

  parallel_for(0, trials, [&](long trial) {
    Rng noise = Rng::stream(cfg.seed, static_cast<std::uint64_t>(trial), 0xA11CE);
    Rng choice = Rng::stream(cfg.seed, static_cast<std::uint64_t>(trial), 0xB0B);

    EstimateWindow window;
    for (int t = 0; t <= setup.T; ++t) {
      window.estimates.push_back(plant.x0_mean);
      window.raw_outputs.push_back(plant.C * plant.x0_mean +
                                   chol_r * noise.normal_vector(plant.output_dim()));
    }
    window.true_state = plant.x0_mean + chol_x0 * noise.normal_vector(plant.state_dim());

    CyberMode mode = CyberMode::NoDetection;
    double total = 0.0;
    for (int k = 0; k < stages; ++k) {
      // Fixed per-stage draw layout keeps streams aligned across policies.
      const Vector w_draw = noise.normal_vector(plant.state_dim());
      const Vector v_draw = noise.normal_vector(plant.output_dim());
      const Vector wm_draw = noise.normal_vector(plant.input_dim());
      const double pick = choice.uniform();

      const auto& g = policy.g[static_cast<std::size_t>(k)][static_cast<std::size_t>(
          mode_index(mode))];
      int j = 0;
      double acc = 0.0;
      for (int jj = 0; jj < g.size(); ++jj) {
        acc += g(jj);
        if (pick <= acc) {
          j = jj;
          break;
        }
        j = jj;
      }
      const Subsystem& sub = setup.subsystems[static_cast<std::size_t>(j)];

      const bool attacked = stage_attack[static_cast<std::size_t>(k)].kind !=
                            AttackAction::Kind::NoAttack;
      const AttackAction& action = (mode == CyberMode::Safe)
                                       ? setup.attacks[0]
                                       : stage_attack[static_cast<std::size_t>(k)];
      const Vector delivered = apply_attack(action, window, window.clean_output());
      const Vector innovation = delivered - plant.C * window.prediction();
      const Vector filtered = window.prediction() + sub.kalman_gain * innovation;
      Vector u = sub.controller_gain * filtered;
      if (sub.has_watermark()) u += sub.watermark_chol * wm_draw;

      double stage_cost;
      if (mode == CyberMode::FalseAlarm) {
        stage_cost = setup.p_f;
      } else {
        stage_cost = window.true_state.dot(setup.weights.W * window.true_state) +
                     u.dot(setup.weights.U * u);
      }
      total += stage_cost;
      stage_sum[static_cast<std::size_t>(trial) * stages + static_cast<std::size_t>(k)] =
          stage_cost;

      // Mode transition: the subsystem's detector scores this stage's
      // innovation; an alarm is a detection when an attack was in effect.
      if (mode == CyberMode::NoDetection) {
        const double stat =
            innovation.dot(pz_lu[static_cast<std::size_t>(j)].solve(innovation));
        if (stat > sub.detector.threshold) {
          mode = attacked ? CyberMode::Safe : CyberMode::FalseAlarm;
        }
      } else if (mode == CyberMode::FalseAlarm) {
        mode = CyberMode::NoDetection;
      }

      const Vector next_true = plant.A * window.true_state + plant.B * u + chol_q * w_draw;
      const Vector next_raw = plant.C * next_true + chol_r * v_draw;
      window.advance(plant.A * filtered + plant.B * u, next_raw, next_true);
    }
    totals[static_cast<std::size_t>(trial)] = total;
    safe_at_end[static_cast<std::size_t>(trial)] = mode == CyberMode::Safe ? 1 : 0;
  });

  double mean = 0.0;
  for (const double t : totals) mean += t;
  mean /= trials;
  double var = 0.0;
  for (const double t : totals) var += (t - mean) * (t - mean);
  var = trials > 1 ? var / (trials - 1) : 0.0;
  out->mc_total_mean = mean;
  out->mc_total_se = std::sqrt(var / trials);
  out->mc_stage_cost.assign(static_cast<std::size_t>(stages), 0.0);
  for (int t = 0; t < trials; ++t) {
    for (int k = 0; k < stages; ++k) {
      out->mc_stage_cost[static_cast<std::size_t>(k)] +=
          stage_sum[static_cast<std::size_t>(t) * stages + static_cast<std::size_t>(k)];
    }
  }
  for (auto& c : out->mc_stage_cost) c /= trials;
  long safe = 0;
  for (const auto s : safe_at_end) safe += s;
  out->mc_final_p_safe = static_cast<double>(safe) / trials;
}

struct AlgorithmStats {
  bool ran = false;
  double wall_seconds = 0.0;
  long lp_solves = 0;
  double total_payoff = 0.0;
  std::array<double, 3> v_bar{0.0, 0.0, 0.0};  // suboptimal only
  ConvergenceReport convergence;               // moving horizon only
  std::string skip_reason;
};

struct ScalingRow {
  std::string algorithm;
  int K = 0;
  double wall_seconds = 0.0;
  long lp_solves = 0;
};

struct RunReport {
  std::vector<PolicyEvaluation> policies;
  std::vector<Policy> policy_strategies;
  std::vector<std::array<Vector, 3>> attacker_strategies;  // moving-horizon f*, per stage
  std::vector<std::array<double, 3>> mh_values;            // equilibrium value per stage/mode
  std::vector<std::array<double, 3>> subopt_values;
  AlgorithmStats moving_horizon;
  AlgorithmStats suboptimal;
  double kernel_seconds = 0.0;
  std::vector<ScalingRow> scaling;
  int K = 0;
};

namespace detail {

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

inline TransitionKernel obtain_kernel(const ScenarioConfig& cfg, const BuiltGame& built,
                                      double* kernel_seconds) {
  if (cfg.kernel_cache && std::filesystem::exists(*cfg.kernel_cache)) {
    return load_kernel_csv(*cfg.kernel_cache, built.setup.num_attacks(),
                           built.setup.num_subsystems());
  }
  KernelEstimationOptions opts;
  opts.n_trials = cfg.kernel_trials;
  opts.burn_in = cfg.kernel_burn_in;
  opts.inject_settle = cfg.inject_settle;
  opts.seed = cfg.seed;
  detail::StopWatch watch;
  TransitionKernel kernel = estimate_transition_kernel(
      built.setup.plant, built.setup.subsystems, built.setup.attacks, built.initial.window, opts);
  if (kernel_seconds != nullptr) *kernel_seconds = watch.seconds();
  if (cfg.kernel_cache) save_kernel_csv(kernel, *cfg.kernel_cache);
  return kernel;
}

/// Runs the configured algorithms plus the two fixed-subsystem baselines
/// against the scenario schedule; an Algorithm 1 budget overrun downgrades
/// to a skip with a warning when both algorithms were requested.
inline RunReport run_comparison(const ScenarioConfig& cfg) {
  const BuiltGame built = build_game(cfg);
  RunReport report;
  report.K = cfg.K;
  const TransitionKernel kernel = obtain_kernel(cfg, built, &report.kernel_seconds);

  std::vector<Policy> policies;
  if (cfg.algorithm == "mh" || cfg.algorithm == "both") {
    detail::StopWatch watch;
    const auto mh = run_moving_horizon(built.setup, kernel, built.initial);
    report.moving_horizon.ran = true;
    report.moving_horizon.wall_seconds = watch.seconds();
    report.moving_horizon.lp_solves = mh.lp_solves;
    report.moving_horizon.total_payoff = mh.total_payoff;
    if (static_cast<int>(mh.stages.size()) >= 2) {
      report.moving_horizon.convergence =
          convergence_diagnostic(mh, std::min<int>(10, built.setup.K), 1e-6);
    }
    policies.push_back(Policy::from_algorithm("moving_horizon", mh));
    for (std::size_t k = 0; k < mh.stages.size(); ++k) {
      report.attacker_strategies.push_back(mh.profile_at(k).f);
      report.mh_values.push_back({mh.stages[k].solutions[0].value,
                                  mh.stages[k].solutions[1].value,
                                  mh.stages[k].solutions[2].value});
    }
  }
  if (cfg.algorithm == "subopt" || cfg.algorithm == "both") {
    const long long need =
        total_pure_histories(built.setup.num_attacks() * built.setup.num_subsystems(),
                             built.setup.K);
    if (need > cfg.budget) {
      if (cfg.algorithm == "subopt") throw BudgetExceededError(need, cfg.budget);
      report.suboptimal.skip_reason = "pure-history budget exceeded: needs " +
                                      std::to_string(need) + " of " +
                                      std::to_string(cfg.budget);
      std::fprintf(stderr, "warning: skipping the finite-horizon algorithm (%s)\n",
                   report.suboptimal.skip_reason.c_str());
    } else {
      detail::StopWatch watch;
      const auto subopt = robust_value_iteration(built.setup, kernel, built.initial, cfg.budget);
      report.suboptimal.ran = true;
      report.suboptimal.wall_seconds = watch.seconds();
      report.suboptimal.lp_solves = subopt.lp_solves;
      report.suboptimal.v_bar = subopt.v_bar;
      report.suboptimal.total_payoff = evaluate_total_payoff(
          built.setup, built.initial, subopt.profiles(), kernel);
      policies.push_back(Policy::from_algorithm("suboptimal", subopt));
      for (std::size_t k = 0; k < subopt.stages.size(); ++k) {
        report.subopt_values.push_back({subopt.stages[k][0].value, subopt.stages[k][1].value,
                                        subopt.stages[k][2].value});
      }
    }
  }
  policies.push_back(
      Policy::fixed("always_subsystem_2", built.setup.num_subsystems(),
                    std::min(1, built.setup.num_subsystems() - 1), built.setup.K));
  policies.push_back(Policy::fixed("always_subsystem_1", built.setup.num_subsystems(), 0,
                                   built.setup.K));

  for (const auto& policy : policies) {
    PolicyEvaluation eval;
    eval.name = policy.name;
    evaluate_expected(cfg, built.setup, kernel, built.initial, policy, &eval);
    evaluate_rollouts(cfg, built.setup, policy, &eval);
    report.policies.push_back(std::move(eval));
    report.policy_strategies.push_back(policy);
  }
  return report;
}

/// Wall-clock scaling sweep. Each timing point repeats the run enough
/// times to accumulate a measurable duration and reports the best round,
/// which keeps ratios stable on a loaded machine.
inline std::vector<ScalingRow> run_scaling_benchmark(const ScenarioConfig& cfg,
                                                     const std::vector<int>& k_list_mh,
                                                     const std::vector<int>& k_list_subopt) {
  std::vector<ScalingRow> rows;
  const BuiltGame base = build_game(cfg);
  const TransitionKernel kernel = obtain_kernel(cfg, base, nullptr);

  auto time_run = [&](const std::function<long()>& body) {
    detail::StopWatch probe;
    long solves = body();
    double single = std::max(probe.seconds(), 1e-7);
    const int reps = static_cast<int>(std::min(200.0, std::max(1.0, 0.05 / single)));
    double best = std::numeric_limits<double>::infinity();
    for (int round = 0; round < 3; ++round) {
      detail::StopWatch watch;
      for (int r = 0; r < reps; ++r) solves = body();
      best = std::min(best, watch.seconds() / reps);
    }
    return std::pair<double, long>(best, solves);
  };

  for (const int k : k_list_mh) {
    ScenarioConfig scaled = cfg;
    scaled.K = k;
    const BuiltGame built = build_game(scaled);
    const auto [secs, solves] = time_run([&] {
      return run_moving_horizon(built.setup, kernel, built.initial).lp_solves;
    });
    rows.push_back({"moving_horizon", k, secs, solves});
  }
  for (const int k : k_list_subopt) {
    ScenarioConfig scaled = cfg;
    scaled.K = k;
    const BuiltGame built = build_game(scaled);
    const long long need = total_pure_histories(
        built.setup.num_attacks() * built.setup.num_subsystems(), built.setup.K);
    if (need > cfg.budget) {
      std::fprintf(stderr, "warning: bench skips the finite-horizon algorithm at K=%d\n", k);
      continue;
    }
    const auto [secs, solves] = time_run([&] {
      return robust_value_iteration(built.setup, kernel, built.initial, cfg.budget).lp_solves;
    });
    rows.push_back({"suboptimal", k, secs, solves});
  }
  return rows;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace detail

/// Writes cost_series.csv, mode_prob.csv and strategy_series.csv (plus
/// scaling.csv when the report carries benchmark rows). All numeric
/// formatting is fixed so reruns with the same seeds are byte-identical.
inline void emit_plot_data(const RunReport& report, const std::string& outdir) {
  std::filesystem::create_directories(outdir);
  {
    std::ofstream out(outdir + "/cost_series.csv");
    if (!out) throw std::runtime_error("emit_plot_data: cannot write cost_series.csv");
    out << "k,policy,expected_cost\n";
    for (const auto& p : report.policies) {
      for (std::size_t k = 0; k < p.mc_stage_cost.size(); ++k) {
        out << k << ',' << p.name << ',' << detail::format_double(p.mc_stage_cost[k]) << '\n';
      }
    }
  }
  {
    std::ofstream out(outdir + "/mode_prob.csv");
    if (!out) throw std::runtime_error("emit_plot_data: cannot write mode_prob.csv");
    out << "k,policy,p_safe,p_nodetect,p_false\n";
    for (const auto& p : report.policies) {
      for (std::size_t k = 0; k < p.mode_prob.size(); ++k) {
        out << k << ',' << p.name << ',' << detail::format_double(p.mode_prob[k](0)) << ','
            << detail::format_double(p.mode_prob[k](1)) << ','
            << detail::format_double(p.mode_prob[k](2)) << '\n';
      }
    }
  }
  {
    std::ofstream out(outdir + "/strategy_series.csv");
    if (!out) throw std::runtime_error("emit_plot_data: cannot write strategy_series.csv");
    out << "k,policy,mode,player,action_index,probability\n";
    for (std::size_t p = 0; p < report.policy_strategies.size(); ++p) {
      const auto& policy = report.policy_strategies[p];
      for (std::size_t k = 0; k < policy.g.size(); ++k) {
        for (int l = 0; l < 3; ++l) {
          const auto& g = policy.g[k][static_cast<std::size_t>(l)];
          for (Eigen::Index a = 0; a < g.size(); ++a) {
            out << k << ',' << policy.name << ',' << l << ",system," << a << ','
                << detail::format_double(g(a)) << '\n';
          }
        }
      }
      if (policy.name == "moving_horizon") {
        for (std::size_t k = 0; k < report.attacker_strategies.size(); ++k) {
          for (int l = 0; l < 3; ++l) {
            const auto& f = report.attacker_strategies[k][static_cast<std::size_t>(l)];
            for (Eigen::Index a = 0; a < f.size(); ++a) {
              out << k << ',' << policy.name << ',' << l << ",attacker," << a << ','
                  << detail::format_double(f(a)) << '\n';
            }
          }
        }
      }
    }
  }
  if (!report.mh_values.empty() || !report.subopt_values.empty()) {
    std::ofstream out(outdir + "/stage_values.csv");
    if (!out) throw std::runtime_error("emit_plot_data: cannot write stage_values.csv");
    out << "k,algorithm,mode,value\n";
    auto dump = [&](const char* name, const std::vector<std::array<double, 3>>& values) {
      for (std::size_t k = 0; k < values.size(); ++k) {
        for (int l = 0; l < 3; ++l) {
          out << k << ',' << name << ',' << l << ','
              << detail::format_double(values[k][static_cast<std::size_t>(l)]) << '\n';
        }
      }
    };
    dump("moving_horizon", report.mh_values);
    dump("suboptimal", report.subopt_values);
  }
  if (!report.scaling.empty()) {
    std::ofstream out(outdir + "/scaling.csv");
    if (!out) throw std::runtime_error("emit_plot_data: cannot write scaling.csv");
    out << "algorithm,K,wall_seconds,lp_solves\n";
    for (const auto& row : report.scaling) {
      out << row.algorithm << ',' << row.K << ',' << detail::format_double(row.wall_seconds)
          << ',' << row.lp_solves << '\n';
    }
  }
}

/// JSON run summary: totals, standard errors, detection probabilities and
/// per-algorithm instrumentation. Wall times live here, not in the CSVs.
inline void write_run_summary(const RunReport& report, const std::string& outdir) {
  nlohmann::json j;
  j["K"] = report.K;
  j["kernel_seconds"] = report.kernel_seconds;
  for (const auto& p : report.policies) {
    nlohmann::json pj;
    pj["mc_total_mean"] = p.mc_total_mean;
    pj["mc_total_se"] = p.mc_total_se;
    pj["mc_final_p_safe"] = p.mc_final_p_safe;
    pj["final_p_safe"] = p.mode_prob.back()(0);
    pj["expected_total"] = 0.0;
    double acc = 0.0;
    for (const double c : p.expected_cost) acc += c;
    pj["expected_total"] = acc;
    j["policies"][p.name] = pj;
  }
  auto alg_json = [](const AlgorithmStats& a) {
    nlohmann::json aj;
    aj["ran"] = a.ran;
    aj["wall_seconds"] = a.wall_seconds;
    aj["lp_solves"] = a.lp_solves;
    aj["total_payoff"] = a.total_payoff;
    if (!a.skip_reason.empty()) aj["skip_reason"] = a.skip_reason;
    return aj;
  };
  j["algorithms"]["moving_horizon"] = alg_json(report.moving_horizon);
  j["algorithms"]["moving_horizon"]["converged"] = report.moving_horizon.convergence.converged;
  j["algorithms"]["moving_horizon"]["strategy_drift"] =
      report.moving_horizon.convergence.strategy_drift;
  j["algorithms"]["moving_horizon"]["q_drift"] = report.moving_horizon.convergence.q_drift;
  j["algorithms"]["suboptimal"] = alg_json(report.suboptimal);
  j["algorithms"]["suboptimal"]["v_bar"] = report.suboptimal.v_bar;

  std::filesystem::create_directories(outdir);
  std::ofstream out(outdir + "/run_summary.json");
  if (!out) throw std::runtime_error("write_run_summary: cannot write run_summary.json");
  out << j.dump(2) << '\n';
}

}  // namespace secure_game
