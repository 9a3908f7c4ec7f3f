#pragma once

#include "secure_game/detection.hpp"
#include "secure_game/sim.hpp"
#include "secure_game/threads.hpp"

#include <cstdint>
#include <vector>

namespace secure_game {

struct KernelEstimationOptions {
  int n_trials = 20000;
  int burn_in = 50;        // clean steps before the record used for replay
  int inject_settle = 10;  // attacked steps before the injection residual is scored
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = max_threads()
};

namespace detail {

/// One Monte Carlo trial: run the closed loop clean long enough to reach
/// the stochastic steady state and to fill the replay record, keep the
/// attack in effect for its settle window, then score the last attacked
/// innovation against the subsystem's chi-squared threshold.
inline bool attack_alarm_trial(const PlantModel& plant, const Subsystem& sub,
                               const AttackAction& attack, const Vector& start_mean,
                               const Matrix& chol_x0, const Matrix& chol_q, const Matrix& chol_r,
                               const LuDecomposition& pz_lu, int burn_in, int inject_settle,
                               Rng rng) {
  const int delay = attack.kind == AttackAction::Kind::Replay ? attack.delay_steps : 0;
  const int attacked_steps =
      attack.kind == AttackAction::Kind::Replay ? attack.delay_steps : inject_settle;
  const int clean_steps = burn_in + delay;

  Vector x = start_mean + chol_x0 * rng.normal_vector(plant.state_dim());
  Vector pred = start_mean;
  std::vector<Vector> record;
  record.reserve(static_cast<std::size_t>(clean_steps + attacked_steps));

  double last_stat = 0.0;
  for (int t = 0; t < clean_steps + attacked_steps; ++t) {
    const Vector y = plant.C * x + chol_r * rng.normal_vector(plant.output_dim());
    record.push_back(y);
    Vector delivered = y;
    if (t >= clean_steps) {
      if (attack.kind == AttackAction::Kind::Replay) {
        delivered = record[static_cast<std::size_t>(t - delay)];
      } else {
        delivered = y + attack.bias;
      }
    }
    const Vector innovation = delivered - plant.C * pred;
    if (t + 1 == clean_steps + attacked_steps) {
      last_stat = innovation.dot(pz_lu.solve(innovation));
    }
    const Vector filtered = pred + sub.kalman_gain * innovation;
    Vector u = sub.controller_gain * filtered;
    if (sub.has_watermark()) {
      u += sub.watermark_chol * rng.normal_vector(plant.input_dim());
    }
    pred = plant.A * filtered + plant.B * u;
    x = plant.A * x + plant.B * u + chol_q * rng.normal_vector(plant.state_dim());
  }
  return last_stat > sub.detector.threshold;
}

}  // namespace detail

/// Estimates P(next mode | source mode, attack i, subsystem j). The Safe
/// row is absorbing, the FalseAlarm row hands back to NoDetection, and the
/// no-attack row is (0, 1 - alpha, alpha) analytically. Attacked rows are
/// Monte Carlo detection frequencies; per-trial RNG streams are derived
/// from (seed, pair, trial) so the result is schedule-independent.
inline TransitionKernel estimate_transition_kernel(const PlantModel& plant,
                                                   const std::vector<Subsystem>& subsystems,
                                                   const std::vector<AttackAction>& attacks,
                                                   const EstimateWindow& window,
                                                   const KernelEstimationOptions& opts) {
  if (opts.n_trials < 1) throw std::invalid_argument("estimate_transition_kernel: n_trials >= 1");
  const int m = static_cast<int>(attacks.size());
  const int n = static_cast<int>(subsystems.size());
  TransitionKernel kernel(m, n);

  const Matrix chol_x0 = cholesky_psd(plant.x0_cov);
  const Matrix chol_q = cholesky_psd(plant.Q);
  const Matrix chol_r = cholesky_psd(plant.R);

  for (int j = 0; j < n; ++j) {
    const Subsystem& sub = subsystems[static_cast<std::size_t>(j)];
    const LuDecomposition pz_lu(sub.innovation_cov);
    for (int i = 0; i < m; ++i) {
      kernel.row(i, j, CyberMode::Safe) = {1.0, 0.0, 0.0};
      kernel.row(i, j, CyberMode::FalseAlarm) = {0.0, 1.0, 0.0};
      if (attacks[static_cast<std::size_t>(i)].kind == AttackAction::Kind::NoAttack) {
        const double alpha = sub.detector.false_alarm_rate;
        kernel.row(i, j, CyberMode::NoDetection) = {0.0, 1.0 - alpha, alpha};
        continue;
      }
      const long pair_stream = static_cast<long>(i) * n + j;
      std::vector<std::uint8_t> alarms(static_cast<std::size_t>(opts.n_trials), 0);
      parallel_for(
          0, opts.n_trials,
          [&](long trial) {
            alarms[static_cast<std::size_t>(trial)] = detail::attack_alarm_trial(
                plant, sub, attacks[static_cast<std::size_t>(i)], window.true_state, chol_x0,
                chol_q, chol_r, pz_lu, opts.burn_in, opts.inject_settle,
                Rng::stream(opts.seed, static_cast<std::uint64_t>(pair_stream),
                            static_cast<std::uint64_t>(trial)));
          },
          opts.threads);
      long hits = 0;
      for (const auto a : alarms) hits += a;
      const double p_detect = static_cast<double>(hits) / opts.n_trials;
      kernel.row(i, j, CyberMode::NoDetection) = {p_detect, 1.0 - p_detect, 0.0};
    }
  }
  kernel.validate();
  return kernel;
}

}  // namespace secure_game
