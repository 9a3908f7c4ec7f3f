#pragma once

#include "secure_game/linalg.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace secure_game {

struct SingularCovarianceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Regularized lower incomplete gamma P(a, x), series expansion.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

/// Regularized upper incomplete gamma Q(a, x), Lentz continued fraction.
inline double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

/// Upper tail probability P(chi^2_m > x).
inline double chi2_tail(int dof, double x) {
  if (dof < 1) throw std::invalid_argument("chi2_tail: dof must be >= 1");
  if (x <= 0.0) return 1.0;
  const double a = 0.5 * dof;
  const double half = 0.5 * x;
  if (half < a + 1.0) return 1.0 - detail::gamma_p_series(a, half);
  return detail::gamma_q_cf(a, half);
}

/// Threshold t with P(chi^2_m > t) = alpha, found by bisection on the
/// regularized incomplete-gamma tail.
inline double chi2_threshold(int dof, double alpha) {
  if (dof < 1) throw std::invalid_argument("chi2_threshold: dof must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("chi2_threshold: alpha must lie in (0, 1)");
  }
  double lo = 0.0;
  double hi = 1.0;
  while (chi2_tail(dof, hi) > alpha) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_tail(dof, mid) > alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-12 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

/// z^T Pz^-1 z for an innovation z with covariance Pz.
inline double chi2_statistic(const Vector& residual, const Matrix& pz) {
  if (pz.rows() != pz.cols() || pz.rows() != residual.size()) {
    throw DimensionError("chi2_statistic: dimension mismatch");
  }
  try {
    return residual.dot(LuDecomposition(pz).solve(residual));
  } catch (const SingularMatrixError&) {
    throw SingularCovarianceError("chi2_statistic: innovation covariance is singular");
  }
}

/// Chi-squared alarm specification: fires when z^T Pz^-1 z exceeds the
/// (1 - alpha) quantile with statistic_dim degrees of freedom.
struct DetectorSpec {
  double false_alarm_rate = 0.05;
  int statistic_dim = 0;
  double threshold = 0.0;
  int window_T1 = 0;

  static DetectorSpec chi_squared(int m, double alpha, int window_T1 = 0) {
    DetectorSpec spec;
    spec.false_alarm_rate = alpha;
    spec.statistic_dim = m;
    spec.threshold = chi2_threshold(m, alpha);
    spec.window_T1 = window_T1;
    return spec;
  }

  void validate() const {
    if (!(false_alarm_rate > 0.0 && false_alarm_rate < 1.0)) {
      throw std::invalid_argument("DetectorSpec: alpha must lie in (0, 1)");
    }
    if (statistic_dim < 1) throw std::invalid_argument("DetectorSpec: statistic_dim must be >= 1");
    const double expected = chi2_threshold(statistic_dim, false_alarm_rate);
    if (std::abs(threshold - expected) > 1e-8 * (1.0 + expected)) {
      throw std::invalid_argument("DetectorSpec: threshold does not match alpha");
    }
    if (window_T1 < 0) throw std::invalid_argument("DetectorSpec: window_T1 must be >= 0");
  }
};

/// Cyber modes of the switched system. Safe is absorbing; FalseAlarm pays
/// the p_f penalty and hands back to NoDetection at the next stage.
enum class CyberMode { Safe = 0, NoDetection = 1, FalseAlarm = 2 };

constexpr std::array<CyberMode, 3> kAllModes = {CyberMode::Safe, CyberMode::NoDetection,
                                                CyberMode::FalseAlarm};

inline int mode_index(CyberMode m) { return static_cast<int>(m); }

/// Per action pair (i, j) and source mode, the distribution over next
/// modes (p_safe, p_nodetect, p_false).
class TransitionKernel {
 public:
  TransitionKernel() = default;
  TransitionKernel(int num_attacks, int num_subsystems)
      : m_(num_attacks), n_(num_subsystems),
        rows_(static_cast<std::size_t>(num_attacks) * num_subsystems * 3, {0.0, 0.0, 0.0}) {}

  int num_attacks() const { return m_; }
  int num_subsystems() const { return n_; }

  std::array<double, 3>& row(int i, int j, CyberMode source) {
    return rows_[index(i, j, source)];
  }
  const std::array<double, 3>& row(int i, int j, CyberMode source) const {
    return rows_[index(i, j, source)];
  }

  double prob(int i, int j, CyberMode source, CyberMode next) const {
    return rows_[index(i, j, source)][mode_index(next)];
  }

  void validate(double tol = 1e-9) const {
    for (int i = 0; i < m_; ++i) {
      for (int j = 0; j < n_; ++j) {
        for (CyberMode src : kAllModes) {
          const auto& r = row(i, j, src);
          double sum = 0.0;
          for (double v : r) {
            if (v < -tol || v > 1.0 + tol) {
              throw std::invalid_argument("TransitionKernel: entry outside [0, 1]");
            }
            sum += v;
          }
          if (std::abs(sum - 1.0) > tol) {
            throw std::invalid_argument("TransitionKernel: row does not sum to 1");
          }
          if (src == CyberMode::Safe &&
              (std::abs(r[0] - 1.0) > tol || std::abs(r[1]) > tol || std::abs(r[2]) > tol)) {
            throw std::invalid_argument("TransitionKernel: Safe must be absorbing");
          }
        }
      }
    }
  }

 private:
  std::size_t index(int i, int j, CyberMode source) const {
    if (i < 0 || i >= m_ || j < 0 || j >= n_) {
      throw DimensionError("TransitionKernel: action pair out of range");
    }
    return (static_cast<std::size_t>(i) * n_ + j) * 3 + static_cast<std::size_t>(mode_index(source));
  }

  int m_ = 0;
  int n_ = 0;
  std::vector<std::array<double, 3>> rows_;
};

inline void save_kernel_csv(const TransitionKernel& kernel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_kernel_csv: cannot open " + path);
  out << "i,j,source_mode,p_safe,p_nodetect,p_false\n";
  char buf[160];
  for (int i = 0; i < kernel.num_attacks(); ++i) {
    for (int j = 0; j < kernel.num_subsystems(); ++j) {
      for (CyberMode src : kAllModes) {
        const auto& r = kernel.row(i, j, src);
        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g,%.17g,%.17g\n", i, j, mode_index(src),
                      r[0], r[1], r[2]);
        out << buf;
      }
    }
  }
}

inline TransitionKernel load_kernel_csv(const std::string& path, int num_attacks,
                                        int num_subsystems) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_kernel_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "i,j,source_mode,p_safe,p_nodetect,p_false") {
    throw std::runtime_error("load_kernel_csv: bad header in " + path);
  }
  TransitionKernel kernel(num_attacks, num_subsystems);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    int i = 0, j = 0, src = 0;
    double p0 = 0.0, p1 = 0.0, p2 = 0.0;
    char comma;
    if (!(ss >> i >> comma >> j >> comma >> src >> comma >> p0 >> comma >> p1 >> comma >> p2)) {
      throw std::runtime_error("load_kernel_csv: bad row: " + line);
    }
    kernel.row(i, j, static_cast<CyberMode>(src)) = {p0, p1, p2};
  }
  kernel.validate();
  return kernel;
}

}  // namespace secure_game
