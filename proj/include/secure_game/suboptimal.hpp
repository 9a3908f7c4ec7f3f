#pragma once

#include "secure_game/game.hpp"
#include "secure_game/matrix_game.hpp"
#include "secure_game/moving_horizon.hpp"

#include <array>
#include <string>
#include <vector>

namespace secure_game {

struct BudgetExceededError : std::runtime_error {
  explicit BudgetExceededError(long long count, long long budget)
      : std::runtime_error("pure-history enumeration needs " + std::to_string(count) +
                           " histories, budget is " + std::to_string(budget)),
        count(count) {}
  long long count;
};

/// Number of pure histories alive at relative stage k (0-based), i.e.
/// (M N)^k, saturating at a sentinel past the budget range.
inline long long pure_history_count(int num_pairs, int k) {
  long long count = 1;
  for (int t = 0; t < k; ++t) {
    if (count > (1ll << 62) / num_pairs) return 1ll << 62;
    count *= num_pairs;
  }
  return count;
}

inline long long total_pure_histories(int num_pairs, int stages) {
  long long total = 0;
  for (int k = 0; k < stages; ++k) {
    const long long c = pure_history_count(num_pairs, k);
    if (c >= (1ll << 62) || total > (1ll << 62) - c) return 1ll << 62;
    total += c;
  }
  return total;
}

/// One pure-strategy history: the (attacker, system) pure pairs played so
/// far and the expectation-mode window they produce.
struct PureHistory {
  std::vector<std::pair<int, int>> actions;
  EstimateWindow window;
};

/// All (MN)^k pure histories at relative stage k, each carrying the window
/// reached by replaying its action sequence through the stage dynamics in
/// expectation mode. Enumeration order is lexicographic in the pair index
/// i * N + j, stage by stage.
inline std::vector<PureHistory> enumerate_pure_histories(const GameSetup& setup,
                                                         const EstimateWindow& initial, int k,
                                                         long long budget = 1000000) {
  if (k < 0) throw std::invalid_argument("enumerate_pure_histories: k must be >= 0");
  const int pairs = setup.num_attacks() * setup.num_subsystems();
  const long long count = pure_history_count(pairs, k);
  if (count > budget) throw BudgetExceededError(count, budget);

  std::vector<PureHistory> current;
  current.push_back({{}, initial});
  for (int stage = 0; stage < k; ++stage) {
    std::vector<PureHistory> next;
    next.reserve(current.size() * static_cast<std::size_t>(pairs));
    for (const auto& h : current) {
      for (int i = 0; i < setup.num_attacks(); ++i) {
        for (int j = 0; j < setup.num_subsystems(); ++j) {
          const auto res = step_dynamics(setup.plant,
                                         setup.subsystems[static_cast<std::size_t>(j)],
                                         setup.attacks[static_cast<std::size_t>(i)], h.window,
                                         NoiseMode::Expectation);
          PureHistory child;
          child.actions = h.actions;
          child.actions.emplace_back(i, j);
          child.window = h.window;
          child.window.advance(res.next_prediction, res.next_raw_output, res.next_true_state);
          next.push_back(std::move(child));
        }
      }
    }
    current = std::move(next);
  }
  return current;
}

struct SuboptimalResult {
  std::array<double, 3> v_bar{};
  std::vector<std::array<GameSolution, 3>> stages;
  std::vector<std::array<long long, 3>> argmax_history;
  long lp_solves = 0;

  MixedStrategyProfile profile_at(std::size_t k) const {
    MixedStrategyProfile p;
    for (int l = 0; l < 3; ++l) {
      p.f[static_cast<std::size_t>(l)] = stages[k][static_cast<std::size_t>(l)].f_star;
      p.g[static_cast<std::size_t>(l)] = stages[k][static_cast<std::size_t>(l)].g_star;
    }
    return p;
  }

  std::vector<MixedStrategyProfile> profiles() const {
    std::vector<MixedStrategyProfile> out;
    out.reserve(stages.size());
    for (std::size_t k = 0; k < stages.size(); ++k) out.push_back(profile_at(k));
    return out;
  }
};

/// Backward robust value iteration over the pure-history tree (the extreme
/// points of the nonstationary payoff/transition sets). The last stage
/// solves the immediate-payoff games; earlier stages back up each
/// history's matrix with its own children's robust values, and the
/// per-stage robust value is the maximum over histories. The returned
/// strategies are read off the maximizing history of each stage, ties
/// broken by lexicographic history order.
inline SuboptimalResult robust_value_iteration(const GameSetup& setup,
                                               const TransitionKernel& kernel,
                                               const HybridGameState& initial,
                                               long long budget = 1000000) {
  setup.validate();
  initial.validate();
  const int m = setup.num_attacks();
  const int n = setup.num_subsystems();
  const int pairs = m * n;
  const int stages = setup.K;
  const long long total = total_pure_histories(pairs, stages);
  if (total > budget) throw BudgetExceededError(total, budget);

  // Forward sweep: per-stage immediate payoff matrices for every history.
  // Windows are only needed transiently to spawn the children.
  std::vector<std::vector<StagePayoffs>> payoffs(static_cast<std::size_t>(stages));
  std::vector<EstimateWindow> windows;
  windows.push_back(initial.window);
  for (int k = 0; k < stages; ++k) {
    auto& stage_payoffs = payoffs[static_cast<std::size_t>(k)];
    stage_payoffs.reserve(windows.size());
    for (const auto& w : windows) stage_payoffs.push_back(build_stage_payoff(setup, w));
    if (k + 1 == stages) break;
    std::vector<EstimateWindow> next;
    next.reserve(windows.size() * static_cast<std::size_t>(pairs));
    for (const auto& w : windows) {
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          const auto res = step_dynamics(setup.plant,
                                         setup.subsystems[static_cast<std::size_t>(j)],
                                         setup.attacks[static_cast<std::size_t>(i)], w,
                                         NoiseMode::Expectation);
          EstimateWindow child = w;
          child.advance(res.next_prediction, res.next_raw_output, res.next_true_state);
          next.push_back(std::move(child));
        }
      }
    }
    windows = std::move(next);
  }

  SuboptimalResult result;
  result.stages.resize(static_cast<std::size_t>(stages));
  result.argmax_history.resize(static_cast<std::size_t>(stages));

  // Backward sweep. values[h][l] holds the robust value of history h at
  // the stage currently being consumed (k + 1).
  std::vector<std::array<double, 3>> child_values;
  for (int k = stages - 1; k >= 0; --k) {
    const auto& stage_payoffs = payoffs[static_cast<std::size_t>(k)];
    std::vector<std::array<double, 3>> values(stage_payoffs.size());
    std::array<GameSolution, 3> best{};
    std::array<long long, 3> best_h{-1, -1, -1};
    for (std::size_t h = 0; h < stage_payoffs.size(); ++h) {
      for (int l = 0; l < 3; ++l) {
        const auto lu = static_cast<std::size_t>(l);
        Matrix q = stage_payoffs[h].r[lu];
        if (k + 1 < stages) {
          for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
              const std::size_t child = h * static_cast<std::size_t>(pairs) +
                                        static_cast<std::size_t>(i * n + j);
              double backup = 0.0;
              for (int hm = 0; hm < 3; ++hm) {
                backup += kernel.prob(i, j, static_cast<CyberMode>(l),
                                      static_cast<CyberMode>(hm)) *
                          child_values[child][static_cast<std::size_t>(hm)];
              }
              q(i, j) += backup;
            }
          }
        }
        GameSolution sol = solve_zero_sum(q);
        ++result.lp_solves;
        values[h][lu] = sol.value;
        if (best_h[lu] < 0 || sol.value > best[lu].value) {
          best[lu] = sol;
          best_h[lu] = static_cast<long long>(h);
        }
      }
    }
    result.stages[static_cast<std::size_t>(k)] = best;
    result.argmax_history[static_cast<std::size_t>(k)] = best_h;
    child_values = std::move(values);
  }
  for (int l = 0; l < 3; ++l) {
    result.v_bar[static_cast<std::size_t>(l)] =
        child_values[0][static_cast<std::size_t>(l)];
  }
  return result;
}

/// Upper-bound certificate: the robust value dominates the realized
/// expected payoff of the checked attacker behavior.
inline bool upper_bound_certificate(double v_bar_1, double realized_total) {
  return v_bar_1 + 1e-9 >= realized_total;
}

/// Worst realized R_K over all pure attacker action sequences (the same
/// pure action across modes at each stage) against a fixed system
/// strategy sequence. Desk-scale only: M^K sequences.
inline double best_response_pure_attacker(const GameSetup& setup, const TransitionKernel& kernel,
                                          const HybridGameState& initial,
                                          const std::vector<MixedStrategyProfile>& system_profiles,
                                          long long budget = 1000000) {
  const int m = setup.num_attacks();
  const int stages = setup.K;
  long long total = 1;
  for (int k = 0; k < stages; ++k) {
    if (total > budget / m) {
      total = budget + 1;
      break;
    }
    total *= m;
  }
  if (total > budget) throw BudgetExceededError(total, budget);

  double worst = -std::numeric_limits<double>::infinity();
  std::vector<int> seq(static_cast<std::size_t>(stages), 0);
  for (long long code = 0; code < total; ++code) {
    long long rem = code;
    for (int k = 0; k < stages; ++k) {
      seq[static_cast<std::size_t>(k)] = static_cast<int>(rem % m);
      rem /= m;
    }
    std::vector<MixedStrategyProfile> profiles = system_profiles;
    for (int k = 0; k < stages; ++k) {
      Vector f = Vector::Zero(m);
      f(seq[static_cast<std::size_t>(k)]) = 1.0;
      for (int l = 0; l < 3; ++l) profiles[static_cast<std::size_t>(k)].f[static_cast<std::size_t>(l)] = f;
    }
    worst = std::max(worst, evaluate_total_payoff(setup, initial, profiles, kernel));
  }
  return worst;
}

}  // namespace secure_game
