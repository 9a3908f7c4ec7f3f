#pragma once

#include "secure_game/game.hpp"
#include "secure_game/kernel_estimation.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace secure_game {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::vector<std::string>& violations)
      : std::runtime_error(join(violations)), violations(violations) {}
  std::vector<std::string> violations;

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "scenario validation failed:";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
  }
};

/// One phase of the rollout attack schedule, in game-relative stages
/// (stage 0 is the first played stage); to_stage < 0 means "until the end".
struct AttackScheduleEntry {
  enum class Kind { Replay, Inject };
  Kind kind = Kind::Replay;
  int from_stage = 0;
  int to_stage = -1;
  double delay_seconds = 0.0;  // Replay
  Vector bias;                 // Inject

  bool active_at(int stage) const {
    return stage >= from_stage && (to_stage < 0 || stage <= to_stage);
  }
};

/// File-backed experiment description; see load_scenario for the schema.
struct ScenarioConfig {
  bool plant_continuous = true;
  Matrix A, B, C, Q, R;
  Vector x0_mean;
  Matrix x0_cov;
  double Ts = 1.0;
  int K = 10;
  double alpha = 0.05;
  std::optional<double> p_f;  // absent: 10x the steady no-attack stage cost
  Matrix W, U;
  std::vector<double> watermark_vars;   // one subsystem per entry, cov = var * I
  std::vector<double> replay_grid_s;    // ascending, seconds
  std::vector<Vector> injection_grid;   // m-vectors
  std::vector<AttackScheduleEntry> schedule;
  std::uint64_t seed = 1;
  int kernel_trials = 20000;
  int kernel_burn_in = 50;
  int inject_settle = 10;
  int rollout_trials = 10000;
  std::string algorithm = "both";  // mh | subopt | both
  long long budget = 1000000;
  std::string out_dir = "out";
  std::optional<std::string> kernel_cache;
};

namespace detail {

inline void require_keys(const nlohmann::json& obj, const char* where,
                         const std::vector<std::string>& allowed,
                         std::vector<std::string>* violations) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      violations->push_back(std::string(where) + ": unknown key \"" + key + "\"");
    }
  }
}

inline Matrix parse_matrix(const nlohmann::json& j, const char* name,
                           std::vector<std::string>* violations) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    violations->push_back(std::string(name) + ": expected an array of rows");
    return Matrix();
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_array() ||
        static_cast<Eigen::Index>(j[static_cast<std::size_t>(i)].size()) != cols) {
      violations->push_back(std::string(name) + ": ragged rows");
      return Matrix();
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& cell = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
      if (!cell.is_number()) {
        violations->push_back(std::string(name) + ": non-numeric entry");
        return Matrix();
      }
      out(i, c) = cell.get<double>();
    }
  }
  return out;
}

inline Vector parse_vector(const nlohmann::json& j, const char* name,
                           std::vector<std::string>* violations) {
  if (!j.is_array()) {
    violations->push_back(std::string(name) + ": expected an array");
    return Vector();
  }
  Vector out(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const auto& cell = j[static_cast<std::size_t>(i)];
    if (!cell.is_number()) {
      violations->push_back(std::string(name) + ": non-numeric entry");
      return Vector();
    }
    out(i) = cell.get<double>();
  }
  return out;
}

}  // namespace detail

namespace detail {

inline ScenarioConfig extract_scenario(const nlohmann::json& root,
                                       std::vector<std::string>* violations) {
  std::vector<std::string>& bad = *violations;
  detail::require_keys(root, "scenario",
                       {"plant", "Ts", "K", "alpha", "p_f", "weights", "subsystems",
                        "replay_grid_s", "injection_grid", "attack_schedule", "seed",
                        "monte_carlo", "algorithm", "budget", "out_dir", "kernel_cache"},
                       &bad);

  ScenarioConfig cfg;
  if (!root.contains("plant") || !root["plant"].is_object()) {
    bad.push_back("plant: required object");
  } else {
    const auto& plant = root["plant"];
    detail::require_keys(plant, "plant",
                         {"continuous", "A", "B", "C", "Q", "R", "x0_mean", "x0_cov"}, &bad);
    if (plant.contains("continuous")) cfg.plant_continuous = plant["continuous"].get<bool>();
    for (const char* key : {"A", "B", "C", "Q", "R", "x0_cov"}) {
      if (!plant.contains(key)) bad.push_back(std::string("plant.") + key + ": required");
    }
    if (!plant.contains("x0_mean")) bad.push_back("plant.x0_mean: required");
    if (bad.empty()) {
      cfg.A = detail::parse_matrix(plant["A"], "plant.A", &bad);
      cfg.B = detail::parse_matrix(plant["B"], "plant.B", &bad);
      cfg.C = detail::parse_matrix(plant["C"], "plant.C", &bad);
      cfg.Q = detail::parse_matrix(plant["Q"], "plant.Q", &bad);
      cfg.R = detail::parse_matrix(plant["R"], "plant.R", &bad);
      cfg.x0_cov = detail::parse_matrix(plant["x0_cov"], "plant.x0_cov", &bad);
      cfg.x0_mean = detail::parse_vector(plant["x0_mean"], "plant.x0_mean", &bad);
    }
  }

  if (!root.contains("Ts")) {
    bad.push_back("Ts: required");
  } else if (!root["Ts"].is_number() || root["Ts"].get<double>() <= 0.0) {
    bad.push_back("Ts: must be a positive number");
  } else {
    cfg.Ts = root["Ts"].get<double>();
  }
  if (!root.contains("K")) {
    bad.push_back("K: required");
  } else if (!root["K"].is_number_integer() || root["K"].get<int>() < 1) {
    bad.push_back("K: must be a positive integer");
  } else {
    cfg.K = root["K"].get<int>();
  }
  if (root.contains("alpha")) {
    cfg.alpha = root["alpha"].get<double>();
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) bad.push_back("alpha: must lie in (0, 1)");
  }
  if (root.contains("p_f")) {
    cfg.p_f = root["p_f"].get<double>();
    if (!(*cfg.p_f >= 0.0)) bad.push_back("p_f: must be >= 0");
  }

  if (!root.contains("weights") || !root["weights"].is_object()) {
    bad.push_back("weights: required object with W and U");
  } else {
    detail::require_keys(root["weights"], "weights", {"W", "U"}, &bad);
    if (root["weights"].contains("W")) {
      cfg.W = detail::parse_matrix(root["weights"]["W"], "weights.W", &bad);
    } else {
      bad.push_back("weights.W: required");
    }
    if (root["weights"].contains("U")) {
      cfg.U = detail::parse_matrix(root["weights"]["U"], "weights.U", &bad);
    } else {
      bad.push_back("weights.U: required");
    }
  }

  if (!root.contains("subsystems") || !root["subsystems"].is_array() ||
      root["subsystems"].empty()) {
    bad.push_back("subsystems: required non-empty array");
  } else {
    for (const auto& sub : root["subsystems"]) {
      if (!sub.is_object()) {
        bad.push_back("subsystems: entries must be objects");
        continue;
      }
      detail::require_keys(sub, "subsystems[]", {"watermark_var"}, &bad);
      if (!sub.contains("watermark_var") || !sub["watermark_var"].is_number() ||
          sub["watermark_var"].get<double>() < 0.0) {
        bad.push_back("subsystems[].watermark_var: required nonnegative number");
      } else {
        cfg.watermark_vars.push_back(sub["watermark_var"].get<double>());
      }
    }
  }

  if (root.contains("replay_grid_s")) {
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& v : root["replay_grid_s"]) {
      const double s = v.get<double>();
      if (s <= 0.0) bad.push_back("replay_grid_s: entries must be positive seconds");
      if (s <= prev) bad.push_back("replay_grid_s: entries must be strictly ascending");
      prev = s;
      cfg.replay_grid_s.push_back(s);
    }
  }
  if (root.contains("injection_grid")) {
    for (const auto& v : root["injection_grid"]) {
      cfg.injection_grid.push_back(detail::parse_vector(v, "injection_grid[]", &bad));
    }
  }

  if (root.contains("attack_schedule")) {
    if (!root["attack_schedule"].is_array()) {
      bad.push_back("attack_schedule: must be an array");
    } else {
      for (const auto& e : root["attack_schedule"]) {
        detail::require_keys(e, "attack_schedule[]",
                             {"kind", "from_stage", "to_stage", "delay_s", "bias"}, &bad);
        AttackScheduleEntry entry;
        const std::string kind = e.value("kind", "");
        if (kind == "replay") {
          entry.kind = AttackScheduleEntry::Kind::Replay;
          if (!e.contains("delay_s")) {
            bad.push_back("attack_schedule[]: replay entries need delay_s");
          } else {
            entry.delay_seconds = e["delay_s"].get<double>();
          }
        } else if (kind == "inject") {
          entry.kind = AttackScheduleEntry::Kind::Inject;
          if (!e.contains("bias")) {
            bad.push_back("attack_schedule[]: inject entries need bias");
          } else {
            entry.bias = detail::parse_vector(e["bias"], "attack_schedule[].bias", &bad);
          }
        } else {
          bad.push_back("attack_schedule[].kind: must be \"replay\" or \"inject\"");
        }
        entry.from_stage = e.value("from_stage", 0);
        entry.to_stage = e.value("to_stage", -1);
        if (entry.from_stage < 0) bad.push_back("attack_schedule[].from_stage: must be >= 0");
        cfg.schedule.push_back(entry);
      }
    }
  }

  if (root.contains("seed")) cfg.seed = root["seed"].get<std::uint64_t>();
  if (root.contains("monte_carlo")) {
    const auto& mc = root["monte_carlo"];
    detail::require_keys(mc, "monte_carlo",
                         {"kernel_trials", "kernel_burn_in", "inject_settle", "rollout_trials"},
                         &bad);
    cfg.kernel_trials = mc.value("kernel_trials", cfg.kernel_trials);
    cfg.kernel_burn_in = mc.value("kernel_burn_in", cfg.kernel_burn_in);
    cfg.inject_settle = mc.value("inject_settle", cfg.inject_settle);
    cfg.rollout_trials = mc.value("rollout_trials", cfg.rollout_trials);
    if (cfg.kernel_trials < 1) bad.push_back("monte_carlo.kernel_trials: must be >= 1");
    if (cfg.rollout_trials < 1) bad.push_back("monte_carlo.rollout_trials: must be >= 1");
  }
  if (root.contains("algorithm")) {
    cfg.algorithm = root["algorithm"].get<std::string>();
    if (cfg.algorithm != "mh" && cfg.algorithm != "subopt" && cfg.algorithm != "both") {
      bad.push_back("algorithm: must be mh, subopt or both");
    }
  }
  if (root.contains("budget")) {
    cfg.budget = root["budget"].get<long long>();
    if (cfg.budget < 1) bad.push_back("budget: must be >= 1");
  }
  if (root.contains("out_dir")) cfg.out_dir = root["out_dir"].get<std::string>();
  if (root.contains("kernel_cache")) cfg.kernel_cache = root["kernel_cache"].get<std::string>();

  // Empty attacker grids are legal (a no-attack-only game), but the
  // schedule may only reference attack types the grids provide.
  for (const auto& e : cfg.schedule) {
    if (e.kind == AttackScheduleEntry::Kind::Replay && cfg.replay_grid_s.empty()) {
      bad.push_back("attack_schedule: replay scheduled but replay_grid_s is empty");
    }
    if (e.kind == AttackScheduleEntry::Kind::Inject && cfg.injection_grid.empty()) {
      bad.push_back("attack_schedule: injection scheduled but injection_grid is empty");
    }
  }

  if (!bad.empty()) throw ValidationError(bad);
  return cfg;
}

}  // namespace detail

/// Loads and validates a scenario JSON file. Unknown keys are rejected;
/// every violated invariant is reported by name in the ValidationError.
inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_scenario: cannot open " + path);
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("load_scenario: " + path + ": " + e.what());
  }
  if (!root.is_object()) throw ParseError("load_scenario: top level must be an object");

  std::vector<std::string> bad;
  try {
    return detail::extract_scenario(root, &bad);
  } catch (const nlohmann::json::exception& e) {
    bad.push_back(std::string("wrong value type: ") + e.what());
    throw ValidationError(bad);
  }
}

/// Steady-state per-stage LQG cost of the closed loop (x-hat based, the
/// payoff measure): trace(W S) + trace(L^T U L S) with S the stationary
/// covariance of the filtered estimate.
inline double steady_stage_cost(const PlantModel& plant, const LqgWeights& weights,
                                const Matrix& lqr, const KalmanDesign& kalman) {
  const Matrix closed = plant.A + plant.B * lqr;
  const Matrix drive = kalman.K * kalman.Pz * kalman.K.transpose();
  const Matrix s = solve_discrete_lyapunov(closed, drive);
  return (weights.W * s).trace() + (lqr.transpose() * weights.U * lqr * s).trace();
}

struct BuiltGame {
  GameSetup setup;
  HybridGameState initial;
  Matrix lqr;
  KalmanDesign kalman;
  double plain_stage_cost = 0.0;  // steady no-attack cost of subsystem 1
};

/// Instantiates the game from a validated config: discretize if needed,
/// synthesize the shared LQR/Kalman gains, build the subsystem roster and
/// the discretized attacker action space, derive T and the default p_f.
inline BuiltGame build_game(const ScenarioConfig& cfg) {
  BuiltGame built;
  PlantModel plant;
  if (cfg.plant_continuous) {
    const auto d = discretize_zoh(cfg.A, cfg.B, cfg.Ts);
    plant.A = d.A;
    plant.B = d.B;
  } else {
    plant.A = cfg.A;
    plant.B = cfg.B;
  }
  plant.C = cfg.C;
  plant.Q = cfg.Q;
  plant.R = cfg.R;
  plant.x0_mean = cfg.x0_mean;
  plant.x0_cov = cfg.x0_cov;
  plant.validate();

  built.setup.plant = plant;
  built.setup.weights = LqgWeights{cfg.W, cfg.U};
  built.setup.weights.validate(plant.state_dim(), plant.input_dim());
  built.lqr = lqr_gain(plant, built.setup.weights);
  built.kalman = kalman_gain(plant);

  for (const double var : cfg.watermark_vars) {
    built.setup.subsystems.push_back(make_subsystem(
        plant, built.lqr, built.kalman,
        Matrix(var * Matrix::Identity(plant.input_dim(), plant.input_dim())), cfg.alpha));
  }

  built.setup.attacks.push_back(AttackAction::no_attack());
  int max_delay = 0;
  for (const double seconds : cfg.replay_grid_s) {
    const int steps = replay_delay_steps(seconds, cfg.Ts);
    if (steps < 1) throw ValidationError({"replay_grid_s: delay rounds to zero steps"});
    max_delay = std::max(max_delay, steps);
    built.setup.attacks.push_back(AttackAction::replay(steps));
  }
  for (const auto& bias : cfg.injection_grid) {
    if (bias.size() != plant.output_dim()) {
      throw ValidationError({"injection_grid: bias dimension must match outputs"});
    }
    built.setup.attacks.push_back(AttackAction::inject(bias));
  }

  built.setup.K = cfg.K;
  built.setup.T = max_delay;  // chi-squared detector needs no extra lookback
  built.setup.p_f = cfg.p_f.value_or(
      10.0 * steady_stage_cost(plant, built.setup.weights, built.lqr, built.kalman));
  built.plain_stage_cost = steady_stage_cost(plant, built.setup.weights, built.lqr, built.kalman);
  built.setup.validate();

  built.initial.window = EstimateWindow::constant_fill(plant, built.setup.T);
  built.initial.mode_dist = Eigen::Vector3d(0.0, 1.0, 0.0);
  built.initial.stage = 0;
  return built;
}

/// Attacker action index of the schedule at a stage, classified onto the
/// game's discretized grid (0 is no-attack).
inline int scheduled_action_index(const ScenarioConfig& cfg, int stage) {
  for (const auto& e : cfg.schedule) {
    if (!e.active_at(stage)) continue;
    if (e.kind == AttackScheduleEntry::Kind::Replay) {
      return 1 + classify_replay(e.delay_seconds, cfg.replay_grid_s);
    }
    return 1 + static_cast<int>(cfg.replay_grid_s.size()) +
           classify_injection(e.bias, cfg.injection_grid);
  }
  return 0;
}

/// The literal attack applied in rollouts at a stage (not grid-classified).
inline AttackAction scheduled_action(const ScenarioConfig& cfg, int stage) {
  for (const auto& e : cfg.schedule) {
    if (!e.active_at(stage)) continue;
    if (e.kind == AttackScheduleEntry::Kind::Replay) {
      return AttackAction::replay(replay_delay_steps(e.delay_seconds, cfg.Ts));
    }
    return AttackAction::inject(e.bias);
  }
  return AttackAction::no_attack();
}

}  // namespace secure_game
