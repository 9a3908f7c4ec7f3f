#pragma once

#include "secure_game/detection.hpp"
#include "secure_game/sim.hpp"

#include <array>
#include <string>
#include <vector>

namespace secure_game {

/// Fixed data of one hybrid stochastic game: plant, subsystem roster,
/// discretized attacker action grid, stage-cost weights and the false
/// alarm penalty. attacks[0] is always the no-attack action.
struct GameSetup {
  PlantModel plant;
  std::vector<Subsystem> subsystems;
  std::vector<AttackAction> attacks;
  LqgWeights weights;
  double p_f = 0.0;
  int K = 1;  // number of game stages
  int T = 0;  // lookback window size, max(detector window, max replay delay)

  int num_attacks() const { return static_cast<int>(attacks.size()); }
  int num_subsystems() const { return static_cast<int>(subsystems.size()); }

  void validate() const {
    plant.validate();
    weights.validate(plant.state_dim(), plant.input_dim());
    if (subsystems.empty()) throw std::invalid_argument("GameSetup: no subsystems");
    if (attacks.empty() || attacks.front().kind != AttackAction::Kind::NoAttack) {
      throw std::invalid_argument("GameSetup: attacks[0] must be the no-attack action");
    }
    if (K < 1) throw std::invalid_argument("GameSetup: K must be >= 1");
    if (T < 0) throw std::invalid_argument("GameSetup: T must be >= 0");
    if (!(p_f >= 0.0)) throw std::invalid_argument("GameSetup: p_f must be >= 0");
    int max_delay = 0;
    for (const auto& a : attacks) {
      if (a.kind == AttackAction::Kind::Replay) max_delay = std::max(max_delay, a.delay_steps);
      if (a.kind == AttackAction::Kind::Inject && a.bias.size() != plant.output_dim()) {
        throw DimensionError("GameSetup: injection bias dimension mismatch");
      }
    }
    int window_t1 = 0;
    for (const auto& s : subsystems) window_t1 = std::max(window_t1, s.detector.window_T1);
    if (T != std::max(window_t1, max_delay)) {
      throw std::invalid_argument(
          "GameSetup: T must equal max(detector window, max replay delay)");
    }
  }
};

/// Joint game state: the sliding estimate window plus the distribution
/// over cyber modes (p_safe, p_nodetect, p_false).
struct HybridGameState {
  EstimateWindow window;
  Eigen::Vector3d mode_dist = Eigen::Vector3d(0.0, 1.0, 0.0);
  int stage = 0;

  void validate() const {
    double sum = 0.0;
    for (int l = 0; l < 3; ++l) {
      if (mode_dist(l) < -1e-12) throw std::invalid_argument("HybridGameState: negative mass");
      sum += mode_dist(l);
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("HybridGameState: mode distribution must sum to 1");
    }
  }
};

/// Mixed strategies for one stage, one probability vector per cyber mode
/// (f over attacker actions, g over subsystems).
struct MixedStrategyProfile {
  std::array<Vector, 3> f;
  std::array<Vector, 3> g;

  static MixedStrategyProfile pure(int num_attacks, int num_subsystems, int i, int j) {
    MixedStrategyProfile p;
    for (int l = 0; l < 3; ++l) {
      p.f[static_cast<std::size_t>(l)] = Vector::Zero(num_attacks);
      p.f[static_cast<std::size_t>(l)](i) = 1.0;
      p.g[static_cast<std::size_t>(l)] = Vector::Zero(num_subsystems);
      p.g[static_cast<std::size_t>(l)](j) = 1.0;
    }
    return p;
  }

  void validate(int num_attacks, int num_subsystems) const {
    auto check = [](const Vector& v, Eigen::Index want, const char* who) {
      if (v.size() != want) throw DimensionError(std::string(who) + ": wrong length");
      double sum = 0.0;
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v(i) < -1e-12) throw std::invalid_argument(std::string(who) + ": negative entry");
        sum += v(i);
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument(std::string(who) + ": does not sum to 1");
      }
    };
    for (int l = 0; l < 3; ++l) {
      check(f[static_cast<std::size_t>(l)], num_attacks, "MixedStrategyProfile.f");
      check(g[static_cast<std::size_t>(l)], num_subsystems, "MixedStrategyProfile.g");
    }
  }
};

/// Immediate payoff matrices r(s_kl) for one stage, indexed by mode.
struct StagePayoffs {
  std::array<Matrix, 3> r;
};

namespace detail {

/// Filtered estimate and control for one (attack, subsystem) pair at the
/// current window, expectation mode.
struct PairOutcome {
  Vector filtered;
  Vector control;
};

inline PairOutcome pair_outcome(const GameSetup& setup, const EstimateWindow& window,
                                const Vector& delivered, int j) {
  const Subsystem& sub = setup.subsystems[static_cast<std::size_t>(j)];
  PairOutcome out;
  out.filtered =
      window.prediction() + sub.kalman_gain * (delivered - setup.plant.C * window.prediction());
  out.control = sub.controller_gain * out.filtered;
  return out;
}

inline double quadratic_payoff(const GameSetup& setup, const PairOutcome& o) {
  return o.filtered.dot(setup.weights.W * o.filtered) + o.control.dot(setup.weights.U * o.control);
}

}  // namespace detail

/// r^{ij}(s_kl): at Safe the attack is neutralized (the clean output
/// drives filter and control), at NoDetection the actual pair applies, at
/// FalseAlarm the penalty p_f is paid regardless of the pair.
inline double immediate_payoff(const GameSetup& setup, const EstimateWindow& window,
                               CyberMode mode, int i, int j) {
  if (mode == CyberMode::FalseAlarm) return setup.p_f;
  const int eff = mode == CyberMode::Safe ? 0 : i;
  const Vector delivered =
      apply_attack(setup.attacks[static_cast<std::size_t>(eff)], window, window.clean_output());
  return detail::quadratic_payoff(setup, detail::pair_outcome(setup, window, delivered, j));
}

/// All three per-mode payoff matrices at the given window. The Safe
/// matrix has identical rows (the attack is neutralized), the FalseAlarm
/// matrix is constant p_f.
inline StagePayoffs build_stage_payoff(const GameSetup& setup, const EstimateWindow& window) {
  const int m = setup.num_attacks();
  const int n = setup.num_subsystems();
  StagePayoffs out;
  out.r[0] = Matrix::Zero(m, n);
  out.r[1] = Matrix::Zero(m, n);
  out.r[2] = Matrix::Constant(m, n, setup.p_f);

  std::vector<Vector> delivered(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    delivered[static_cast<std::size_t>(i)] =
        apply_attack(setup.attacks[static_cast<std::size_t>(i)], window, window.clean_output());
  }
  for (int j = 0; j < n; ++j) {
    const double safe =
        detail::quadratic_payoff(setup, detail::pair_outcome(setup, window, delivered[0], j));
    for (int i = 0; i < m; ++i) {
      out.r[0](i, j) = safe;
      out.r[1](i, j) = detail::quadratic_payoff(
          setup, detail::pair_outcome(setup, window, delivered[static_cast<std::size_t>(i)], j));
    }
  }
  return out;
}

/// Expected immediate payoff sum_l p(s_kl) f_l^T r_l g_l.
inline double expected_stage_payoff(const StagePayoffs& payoffs, const Eigen::Vector3d& mode_dist,
                                    const MixedStrategyProfile& profile) {
  double acc = 0.0;
  for (int l = 0; l < 3; ++l) {
    const auto lu = static_cast<std::size_t>(l);
    acc += mode_dist(l) * profile.f[lu].dot(payoffs.r[lu] * profile.g[lu]);
  }
  return acc;
}

/// Advances the hybrid state one stage under a mixed profile: the window
/// moves with the strategy-weighted expected control, delivered output and
/// filtered estimate (Safe-mode terms use the neutralized attack), and the
/// mode distribution moves through the transition kernel.
inline HybridGameState update_with_strategies(const GameSetup& setup,
                                              const HybridGameState& state,
                                              const MixedStrategyProfile& profile,
                                              const TransitionKernel& kernel) {
  const int m = setup.num_attacks();
  const int n = setup.num_subsystems();
  profile.validate(m, n);
  state.validate();
  const EstimateWindow& w = state.window;

  std::vector<Vector> delivered(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    delivered[static_cast<std::size_t>(i)] =
        apply_attack(setup.attacks[static_cast<std::size_t>(i)], w, w.clean_output());
  }

  Vector filtered_mix = Vector::Zero(setup.plant.state_dim());
  Vector control_mix = Vector::Zero(setup.plant.input_dim());
  for (int l = 0; l < 3; ++l) {
    const double wl = state.mode_dist(l);
    if (wl == 0.0) continue;
    const auto lu = static_cast<std::size_t>(l);
    for (int i = 0; i < m; ++i) {
      const double fi = profile.f[lu](i);
      if (fi == 0.0) continue;
      const int eff = (l == mode_index(CyberMode::Safe)) ? 0 : i;
      const Vector& y = delivered[static_cast<std::size_t>(eff)];
      for (int j = 0; j < n; ++j) {
        const double gj = profile.g[lu](j);
        if (gj == 0.0) continue;
        const auto o = detail::pair_outcome(setup, w, y, j);
        filtered_mix += wl * fi * gj * o.filtered;
        control_mix += wl * fi * gj * o.control;
      }
    }
  }

  HybridGameState next;
  next.stage = state.stage + 1;
  next.window = state.window;
  const Vector next_pred = setup.plant.A * filtered_mix + setup.plant.B * control_mix;
  const Vector next_true = setup.plant.A * w.true_state + setup.plant.B * control_mix;
  next.window.advance(next_pred, setup.plant.C * next_true, next_true);

  next.mode_dist.setZero();
  for (int h = 0; h < 3; ++h) {
    double acc = 0.0;
    for (int l = 0; l < 3; ++l) {
      const double wl = state.mode_dist(l);
      if (wl == 0.0) continue;
      const auto lu = static_cast<std::size_t>(l);
      double flpg = 0.0;
      for (int i = 0; i < m; ++i) {
        const double fi = profile.f[lu](i);
        if (fi == 0.0) continue;
        for (int j = 0; j < n; ++j) {
          flpg += fi * profile.g[lu](j) *
                  kernel.prob(i, j, static_cast<CyberMode>(l), static_cast<CyberMode>(h));
        }
      }
      acc += wl * flpg;
    }
    next.mode_dist(h) = acc;
  }
  // Kernel rows are stochastic, so the mass is conserved up to rounding.
  next.mode_dist /= next.mode_dist.sum();
  return next;
}

/// Conditional expected total payoff R_K of a strategy sequence from the
/// given initial state, propagating the mode distribution and window
/// through update_with_strategies.
inline double evaluate_total_payoff(const GameSetup& setup, const HybridGameState& initial,
                                    const std::vector<MixedStrategyProfile>& strategies,
                                    const TransitionKernel& kernel) {
  HybridGameState state = initial;
  double total = 0.0;
  for (const auto& profile : strategies) {
    const StagePayoffs payoffs = build_stage_payoff(setup, state.window);
    total += expected_stage_payoff(payoffs, state.mode_dist, profile);
    state = update_with_strategies(setup, state, profile, kernel);
  }
  return total;
}

}  // namespace secure_game
