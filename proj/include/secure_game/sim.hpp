#pragma once

#include "secure_game/control.hpp"
#include "secure_game/detection.hpp"
#include "secure_game/rng.hpp"

#include <cmath>
#include <deque>
#include <string>
#include <vector>

namespace secure_game {

struct InsufficientHistoryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One attacker action: leave the output alone, replay a delayed output,
/// or add a bias vector.
struct AttackAction {
  enum class Kind { NoAttack, Replay, Inject };

  Kind kind = Kind::NoAttack;
  int delay_steps = 0;  // Replay only, in steps; must stay within the window
  Vector bias;          // Inject only

  static AttackAction no_attack() { return {}; }

  static AttackAction replay(int delay_steps) {
    if (delay_steps < 1) throw std::invalid_argument("AttackAction: replay delay must be >= 1");
    AttackAction a;
    a.kind = Kind::Replay;
    a.delay_steps = delay_steps;
    return a;
  }

  static AttackAction inject(Vector bias) {
    AttackAction a;
    a.kind = Kind::Inject;
    a.bias = std::move(bias);
    return a;
  }
};

/// One switchable subsystem: controller gain, watermark covariance (zero
/// for the plain LQG controller), Kalman gain, innovation covariance and
/// the chi-squared detector calibrated for it.
struct Subsystem {
  Matrix controller_gain;  // p x n
  Matrix watermark_cov;    // p x p, PSD; zero disables the watermark
  Matrix watermark_chol;   // cached lower factor of watermark_cov
  Matrix kalman_gain;      // n x m
  Matrix innovation_cov;   // m x m
  DetectorSpec detector;

  bool has_watermark() const { return watermark_cov.cwiseAbs().maxCoeff() > 0.0; }
};

inline Subsystem make_subsystem(const PlantModel& plant, const Matrix& controller_gain,
                                const KalmanDesign& kalman, const Matrix& watermark_cov,
                                double alpha) {
  Subsystem s;
  s.controller_gain = controller_gain;
  s.watermark_cov = watermark_cov;
  require_psd(watermark_cov, "Subsystem: watermark covariance");
  s.watermark_chol = cholesky_psd(watermark_cov);
  s.kalman_gain = kalman.K;
  s.innovation_cov = kalman.Pz;
  s.detector = DetectorSpec::chi_squared(static_cast<int>(plant.output_dim()), alpha);
  return s;
}

/// Sliding hybrid-state window: the last T+1 pre-action state estimates
/// and the last T+1 raw (pre-attack) plant outputs, plus the current true
/// state mean. estimates.back() is the one-step prediction for the
/// current stage; raw_outputs.back() is the current clean output.
struct EstimateWindow {
  std::deque<Vector> estimates;
  std::deque<Vector> raw_outputs;
  Vector true_state;

  int horizon() const { return static_cast<int>(estimates.size()) - 1; }

  const Vector& prediction() const { return estimates.back(); }
  const Vector& clean_output() const { return raw_outputs.back(); }

  /// Raw output delayed by `delay` steps (delay = 0 is the current one).
  const Vector& delayed_output(int delay) const {
    if (delay < 0 || delay >= static_cast<int>(raw_outputs.size())) {
      throw InsufficientHistoryError("EstimateWindow: replay delay " + std::to_string(delay) +
                                     " exceeds stored history");
    }
    return raw_outputs[raw_outputs.size() - 1 - static_cast<std::size_t>(delay)];
  }

  void advance(Vector next_estimate, Vector next_raw_output, Vector next_true_state) {
    estimates.push_back(std::move(next_estimate));
    estimates.pop_front();
    raw_outputs.push_back(std::move(next_raw_output));
    raw_outputs.pop_front();
    true_state = std::move(next_true_state);
  }

  /// Constant-fill window: the system is assumed to have been holding at
  /// x0 for the whole lookback horizon.
  static EstimateWindow constant_fill(const PlantModel& plant, int horizon) {
    if (horizon < 0) throw std::invalid_argument("EstimateWindow: horizon must be >= 0");
    EstimateWindow w;
    const Vector y0 = plant.C * plant.x0_mean;
    for (int t = 0; t <= horizon; ++t) {
      w.estimates.push_back(plant.x0_mean);
      w.raw_outputs.push_back(y0);
    }
    w.true_state = plant.x0_mean;
    return w;
  }
};

/// y'_k for the chosen action: clean output unchanged, bias added, or the
/// recorded output from delay steps back.
inline Vector apply_attack(const AttackAction& action, const EstimateWindow& window,
                           const Vector& clean_output) {
  switch (action.kind) {
    case AttackAction::Kind::NoAttack:
      return clean_output;
    case AttackAction::Kind::Inject:
      if (action.bias.size() != clean_output.size()) {
        throw DimensionError("apply_attack: bias dimension mismatch");
      }
      return clean_output + action.bias;
    case AttackAction::Kind::Replay:
      return window.delayed_output(action.delay_steps);
  }
  throw std::logic_error("apply_attack: unreachable");
}

enum class NoiseMode { Expectation, Sampling };

struct StageDynamicsResult {
  Vector next_true_state;    // x_{k+1}
  Vector next_prediction;    // xhat_{k+1|k}
  Vector filtered_estimate;  // xhat_{k|k}
  Vector control;            // gamma_k
  Vector residual;           // innovation y'_k - C xhat_{k|k-1} at this stage
  Vector delivered_output;   // y'_k
  Vector next_raw_output;    // y_{k+1} = C x_{k+1} + v_{k+1}
};

/// One stage of the closed loop under a chosen (attack, subsystem) pair.
/// In Expectation mode every noise term sits at its mean, which is the
/// form both game algorithms consume; Sampling mode draws w, v and the
/// watermark from the given generator.
inline StageDynamicsResult step_dynamics(const PlantModel& plant, const Subsystem& subsystem,
                                         const AttackAction& action, const EstimateWindow& window,
                                         NoiseMode mode, Rng* rng = nullptr,
                                         const Matrix* chol_q = nullptr,
                                         const Matrix* chol_r = nullptr) {
  StageDynamicsResult out;
  out.delivered_output = apply_attack(action, window, window.clean_output());
  const Vector& pred = window.prediction();
  out.residual = out.delivered_output - plant.C * pred;
  out.filtered_estimate = pred + subsystem.kalman_gain * out.residual;
  out.control = subsystem.controller_gain * out.filtered_estimate;
  if (mode == NoiseMode::Sampling) {
    if (rng == nullptr) throw std::invalid_argument("step_dynamics: sampling mode needs an rng");
    if (subsystem.has_watermark()) {
      out.control += subsystem.watermark_chol * rng->normal_vector(plant.input_dim());
    }
  }
  out.next_prediction = plant.A * out.filtered_estimate + plant.B * out.control;
  out.next_true_state = plant.A * window.true_state + plant.B * out.control;
  if (mode == NoiseMode::Sampling) {
    if (chol_q == nullptr || chol_r == nullptr) {
      throw std::invalid_argument("step_dynamics: sampling mode needs noise factors");
    }
    out.next_true_state += (*chol_q) * rng->normal_vector(plant.state_dim());
    out.next_raw_output =
        plant.C * out.next_true_state + (*chol_r) * rng->normal_vector(plant.output_dim());
  } else {
    out.next_raw_output = plant.C * out.next_true_state;
  }
  return out;
}

/// Nearest replay window in seconds; ties break toward the smaller index.
inline int classify_replay(double t_a_seconds, const std::vector<double>& grid_seconds) {
  if (grid_seconds.empty()) throw std::invalid_argument("classify_replay: empty grid");
  int best = 0;
  double best_dist = std::abs(t_a_seconds - grid_seconds[0]);
  for (int i = 1; i < static_cast<int>(grid_seconds.size()); ++i) {
    const double d = std::abs(t_a_seconds - grid_seconds[static_cast<std::size_t>(i)]);
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

/// Nearest injection vector in Euclidean norm; ties break toward the
/// smaller index.
inline int classify_injection(const Vector& y_a, const std::vector<Vector>& grid) {
  if (grid.empty()) throw std::invalid_argument("classify_injection: empty grid");
  int best = 0;
  double best_dist = (y_a - grid[0]).norm();
  for (int i = 1; i < static_cast<int>(grid.size()); ++i) {
    const double d = (y_a - grid[static_cast<std::size_t>(i)]).norm();
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

inline int replay_delay_steps(double seconds, double ts) {
  if (!(ts > 0.0)) throw std::invalid_argument("replay_delay_steps: Ts must be positive");
  return static_cast<int>(std::llround(seconds / ts));
}

}  // namespace secure_game
