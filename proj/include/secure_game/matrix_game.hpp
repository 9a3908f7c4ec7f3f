#pragma once

#include "secure_game/linalg.hpp"
#include "secure_game/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace secure_game {

struct NumericalFailureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Value and saddle-point strategies of a finite zero-sum matrix game.
/// The row player (attacker) maximizes f^T Q g, the column player
/// (system) minimizes it.
struct GameSolution {
  double value = 0.0;
  Vector f_star;
  Vector g_star;
  double duality_gap = 0.0;
};

namespace detail {

/// Dense tableau simplex with Bland's rule for
///   max sum(q)  s.t.  Qp q <= 1, q >= 0,
/// where Qp is entrywise positive. Returns the primal solution q and the
/// dual multipliers y (both unnormalized game strategies).
inline void simplex_positive_game(const Matrix& qp, Vector* q_out, Vector* y_out) {
  const Eigen::Index m = qp.rows();
  const Eigen::Index n = qp.cols();
  const Eigen::Index cols = n + m + 1;
  Matrix t = Matrix::Zero(m + 1, cols);
  t.topLeftCorner(m, n) = qp;
  t.block(0, n, m, m) = Matrix::Identity(m, m);
  t.col(cols - 1).head(m).setOnes();
  t.row(m).head(n).setOnes();

  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;

  const double entering_tol = 1e-9;
  const double pivot_tol = 1e-11;
  const long max_pivots = 8000 + 64 * static_cast<long>(m + n) * static_cast<long>(m + n);
  for (long iter = 0;; ++iter) {
    if (iter > max_pivots) {
      throw NumericalFailureError("simplex_positive_game: pivot limit exceeded");
    }
    // Bland: entering variable is the lowest index with positive reduced cost.
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < n + m; ++j) {
      if (t(m, j) > entering_tol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;
    Eigen::Index leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      const double a = t(i, enter);
      if (a > pivot_tol) {
        const double ratio = t(i, cols - 1) / a;
        if (ratio < best_ratio - 1e-15 ||
            (std::abs(ratio - best_ratio) <= 1e-15 && leave >= 0 &&
             basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
          best_ratio = ratio;
          leave = i;
        }
      }
    }
    if (leave < 0) {
      throw NumericalFailureError("simplex_positive_game: unbounded (matrix not positive?)");
    }
    t.row(leave) /= t(leave, enter);
    for (Eigen::Index i = 0; i <= m; ++i) {
      if (i == leave) continue;
      const double factor = t(i, enter);
      if (factor != 0.0) t.row(i) -= factor * t.row(leave);
    }
    basis[static_cast<std::size_t>(leave)] = enter;
  }

  Vector q = Vector::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index var = basis[static_cast<std::size_t>(i)];
    if (var < n) q(var) = t(i, cols - 1);
  }
  Vector y = Vector::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i) y(i) = -t(m, n + i);
  *q_out = q;
  *y_out = y;
}

inline Vector normalize_simplex(Vector v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::max(v(i), 0.0);
  const double s = v.sum();
  if (s <= 0.0) throw NumericalFailureError("normalize_simplex: zero strategy mass");
  return v / s;
}

struct SaddleCheck {
  double lo = 0.0;  // min over pure columns of f*^T Q g
  double hi = 0.0;  // max over pure rows of f^T Q g*
};

inline SaddleCheck saddle_bounds(const Matrix& q, const Vector& f, const Vector& g) {
  SaddleCheck c;
  c.lo = (q.transpose() * f).minCoeff();
  c.hi = (q * g).maxCoeff();
  return c;
}

}  // namespace detail

/// Solves min_g max_f f^T Q g by the standard LP transformation: shift Q
/// to positivity, solve the primal/dual pair with a dense Bland-rule
/// simplex, unshift. The saddle certificate is re-checked on the original
/// matrix; a failed certificate triggers one perturbed re-solve before
/// raising NumericalFailureError.
inline GameSolution solve_zero_sum(const Matrix& q_in) {
  const Eigen::Index m = q_in.rows();
  const Eigen::Index n = q_in.cols();
  if (m < 1 || n < 1) throw DimensionError("solve_zero_sum: empty payoff matrix");
  if (!q_in.allFinite()) {
    throw std::invalid_argument("solve_zero_sum: payoff matrix must be finite");
  }

  // Badly scaled games are solved on Q / s (value and certificate scale
  // linearly and strategies are invariant): an absolute 1e-8 certificate is
  // meaningless past the double-precision floor of huge entries, and
  // near-underflow positive entries would starve the pivot tolerance.
  const double magnitude = q_in.cwiseAbs().maxCoeff();
  const double scale = (magnitude > 100.0 || (magnitude > 0.0 && magnitude < 1e-6))
                           ? magnitude
                           : 1.0;
  const Matrix q = q_in / scale;

  const double cert_tol = 1e-8;
  auto attempt = [&](const Matrix& qq) {
    const double min_entry = qq.minCoeff();
    const double shift = min_entry <= 0.0 ? 1.0 - min_entry : 0.0;
    const Matrix qp = qq.array() + shift;
    Vector qvars, yvars;
    detail::simplex_positive_game(qp, &qvars, &yvars);
    GameSolution sol;
    sol.g_star = detail::normalize_simplex(qvars);
    sol.f_star = detail::normalize_simplex(yvars);
    const double qsum = qvars.sum();
    if (qsum <= 0.0) throw NumericalFailureError("solve_zero_sum: degenerate LP mass");
    sol.value = 1.0 / qsum - shift;
    return sol;
  };

  auto rescaled = [&](GameSolution sol) {
    sol.value *= scale;
    sol.duality_gap *= scale;
    return sol;
  };

  GameSolution sol = attempt(q);
  auto check = detail::saddle_bounds(q, sol.f_star, sol.g_star);
  sol.duality_gap = check.hi - check.lo;
  if (check.lo >= sol.value - cert_tol && check.hi <= sol.value + cert_tol &&
      sol.duality_gap <= cert_tol) {
    return rescaled(sol);
  }

  // Deterministic tiny perturbation, then re-validate against the original Q.
  const double jitter = 1e-11 * std::max(1.0, q.cwiseAbs().maxCoeff());
  Matrix jittered = q;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const std::uint64_t h = mix64(static_cast<std::uint64_t>(i * n + j) + 0x51ED2701ull);
      jittered(i, j) += jitter * (static_cast<double>(h >> 11) * 0x1.0p-53 - 0.5);
    }
  }
  sol = attempt(jittered);
  check = detail::saddle_bounds(q, sol.f_star, sol.g_star);
  sol.value = 0.5 * (check.lo + check.hi);
  sol.duality_gap = check.hi - check.lo;
  if (check.lo >= sol.value - cert_tol && check.hi <= sol.value + cert_tol &&
      sol.duality_gap <= cert_tol) {
    return rescaled(sol);
  }
  throw NumericalFailureError("solve_zero_sum: saddle certificate failed after re-solve");
}

/// Fictitious-play approximation of the same game, used as an independent
/// oracle: alternating best responses against empirical averages, with the
/// running-best upper/lower value bracket retained. Converges as
/// O(1/sqrt(iters)).
inline GameSolution solve_zero_sum_reference(const Matrix& q, long iters) {
  const Eigen::Index m = q.rows();
  const Eigen::Index n = q.cols();
  if (m < 1 || n < 1) throw DimensionError("solve_zero_sum_reference: empty payoff matrix");
  if (iters < 1) throw std::invalid_argument("solve_zero_sum_reference: iters must be >= 1");

  Vector row_payoff = Vector::Zero(m);  // Q * (sum of column picks)
  Vector col_payoff = Vector::Zero(n);  // Q^T * (sum of row picks)
  Vector f_count = Vector::Zero(m);
  Vector g_count = Vector::Zero(n);
  double ub_best = std::numeric_limits<double>::infinity();
  double lb_best = -std::numeric_limits<double>::infinity();

  for (long t = 1; t <= iters; ++t) {
    Eigen::Index best_row = 0;
    for (Eigen::Index i = 1; i < m; ++i) {
      if (row_payoff(i) > row_payoff(best_row)) best_row = i;
    }
    f_count(best_row) += 1.0;
    col_payoff += q.row(best_row).transpose();

    Eigen::Index best_col = 0;
    for (Eigen::Index j = 1; j < n; ++j) {
      if (col_payoff(j) < col_payoff(best_col)) best_col = j;
    }
    g_count(best_col) += 1.0;
    row_payoff += q.col(best_col);

    const double td = static_cast<double>(t);
    ub_best = std::min(ub_best, row_payoff.maxCoeff() / td);
    lb_best = std::max(lb_best, col_payoff.minCoeff() / td);
  }

  GameSolution sol;
  sol.f_star = f_count / f_count.sum();
  sol.g_star = g_count / g_count.sum();
  sol.value = 0.5 * (ub_best + lb_best);
  sol.duality_gap = ub_best - lb_best;
  return sol;
}

}  // namespace secure_game
