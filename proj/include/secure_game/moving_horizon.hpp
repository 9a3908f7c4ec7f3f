#pragma once

#include "secure_game/game.hpp"
#include "secure_game/matrix_game.hpp"

#include <array>
#include <vector>

namespace secure_game {

/// One-stage-lookahead terminal values: entry (i, j) of v[h] is the value
/// of the next-stage matrix game at the window predicted under the current
/// pair (i, j), for next mode h. The FalseAlarm matrix is constant p_f and
/// the Safe matrix game reduces to a column minimum (its payoff rows are
/// identical), so only the NoDetection games need an LP solve.
struct LookaheadValueMatrices {
  std::array<Matrix, 3> v;
};

inline LookaheadValueMatrices lookahead_values(const GameSetup& setup,
                                               const EstimateWindow& window,
                                               long* lp_solves = nullptr) {
  const int m = setup.num_attacks();
  const int n = setup.num_subsystems();
  LookaheadValueMatrices out;
  for (auto& mat : out.v) mat = Matrix::Zero(m, n);
  out.v[2].setConstant(setup.p_f);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto res = step_dynamics(setup.plant, setup.subsystems[static_cast<std::size_t>(j)],
                                     setup.attacks[static_cast<std::size_t>(i)], window,
                                     NoiseMode::Expectation);
      EstimateWindow predicted = window;
      predicted.advance(res.next_prediction, res.next_raw_output, res.next_true_state);
      const StagePayoffs next_payoffs = build_stage_payoff(setup, predicted);
      out.v[0](i, j) = next_payoffs.r[0].row(0).minCoeff();
      out.v[1](i, j) = solve_zero_sum(next_payoffs.r[1]).value;
      if (lp_solves != nullptr) ++*lp_solves;
    }
  }
  return out;
}

/// Per-mode auxiliary matrices Q_k(s_kl) = r(s_kl) + sum_h P^{ij}(h|l) .*
/// v_{k+1}(h), the elementwise kernel-weighted lookahead backup.
inline std::array<Matrix, 3> auxiliary_matrices(const GameSetup& setup,
                                                const StagePayoffs& payoffs,
                                                const LookaheadValueMatrices& lookahead,
                                                const TransitionKernel& kernel) {
  const int m = setup.num_attacks();
  const int n = setup.num_subsystems();
  std::array<Matrix, 3> q;
  for (int l = 0; l < 3; ++l) {
    const auto lu = static_cast<std::size_t>(l);
    q[lu] = payoffs.r[lu];
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        double backup = 0.0;
        for (int h = 0; h < 3; ++h) {
          backup += kernel.prob(i, j, static_cast<CyberMode>(l), static_cast<CyberMode>(h)) *
                    lookahead.v[static_cast<std::size_t>(h)](i, j);
        }
        q[lu](i, j) += backup;
      }
    }
  }
  return q;
}

/// Saddle points of the three per-mode auxiliary games.
inline std::array<GameSolution, 3> stage_solve(const std::array<Matrix, 3>& q,
                                               long* lp_solves = nullptr) {
  std::array<GameSolution, 3> out;
  for (int l = 0; l < 3; ++l) {
    out[static_cast<std::size_t>(l)] = solve_zero_sum(q[static_cast<std::size_t>(l)]);
    if (lp_solves != nullptr) ++*lp_solves;
  }
  return out;
}

struct StageRecord {
  std::array<GameSolution, 3> solutions;
  std::array<Matrix, 3> q;
  Eigen::Vector3d mode_dist;
  double expected_payoff = 0.0;
};

struct MovingHorizonResult {
  std::vector<StageRecord> stages;
  HybridGameState final_state;
  double total_payoff = 0.0;
  long lp_solves = 0;

  MixedStrategyProfile profile_at(std::size_t k) const {
    MixedStrategyProfile p;
    for (int l = 0; l < 3; ++l) {
      p.f[static_cast<std::size_t>(l)] = stages[k].solutions[static_cast<std::size_t>(l)].f_star;
      p.g[static_cast<std::size_t>(l)] = stages[k].solutions[static_cast<std::size_t>(l)].g_star;
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

/// Moving-horizon equilibrium computation: at each stage build the
/// one-stage-lookahead auxiliary games, solve them, and advance the
/// dynamics with the equilibrium profile. The last stage of the horizon is
/// terminal and is solved on the immediate payoff alone, which makes a
/// K = 1 run coincide with the finite-game backward induction.
inline MovingHorizonResult run_moving_horizon(const GameSetup& setup,
                                              const TransitionKernel& kernel,
                                              const HybridGameState& initial) {
  setup.validate();
  initial.validate();
  MovingHorizonResult result;
  result.stages.reserve(static_cast<std::size_t>(setup.K));
  HybridGameState state = initial;
  for (int k = 0; k < setup.K; ++k) {
    const StagePayoffs payoffs = build_stage_payoff(setup, state.window);
    StageRecord record;
    if (k + 1 == setup.K) {
      record.q = payoffs.r;
    } else {
      const LookaheadValueMatrices la = lookahead_values(setup, state.window, &result.lp_solves);
      record.q = auxiliary_matrices(setup, payoffs, la, kernel);
    }
    record.solutions = stage_solve(record.q, &result.lp_solves);
    record.mode_dist = state.mode_dist;

    MixedStrategyProfile profile;
    for (int l = 0; l < 3; ++l) {
      profile.f[static_cast<std::size_t>(l)] = record.solutions[static_cast<std::size_t>(l)].f_star;
      profile.g[static_cast<std::size_t>(l)] = record.solutions[static_cast<std::size_t>(l)].g_star;
    }
    record.expected_payoff = expected_stage_payoff(payoffs, state.mode_dist, profile);
    result.total_payoff += record.expected_payoff;
    result.stages.push_back(std::move(record));
    state = update_with_strategies(setup, state, profile, kernel);
  }
  result.final_state = std::move(state);
  return result;
}

struct ConvergenceReport {
  bool converged = false;
  double strategy_drift = 0.0;
  double q_drift = 0.0;
};

/// Stage-to-stage drift of strategies and auxiliary matrices over the last
/// tail_window stages: the stationarity condition behind treating the
/// switched closed loop as a Markov jump system. Reported as a diagnostic,
/// never asserted.
inline ConvergenceReport convergence_diagnostic(const MovingHorizonResult& result,
                                                int tail_window, double tol) {
  const std::size_t count = result.stages.size();
  if (tail_window < 1 || count < static_cast<std::size_t>(tail_window)) {
    throw std::invalid_argument("convergence_diagnostic: not enough stages");
  }
  ConvergenceReport report;
  const std::size_t first = std::max<std::size_t>(1, count - static_cast<std::size_t>(tail_window));
  for (std::size_t k = first; k < count; ++k) {
    for (int l = 0; l < 3; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      const auto& cur = result.stages[k].solutions[lu];
      const auto& prev = result.stages[k - 1].solutions[lu];
      report.strategy_drift = std::max(
          report.strategy_drift, (cur.f_star - prev.f_star).cwiseAbs().maxCoeff());
      report.strategy_drift = std::max(
          report.strategy_drift, (cur.g_star - prev.g_star).cwiseAbs().maxCoeff());
      report.q_drift = std::max(report.q_drift, (result.stages[k].q[lu] - result.stages[k - 1].q[lu])
                                                    .cwiseAbs()
                                                    .maxCoeff());
    }
  }
  report.converged = report.strategy_drift <= tol && report.q_drift <= tol;
  return report;
}

}  // namespace secure_game
