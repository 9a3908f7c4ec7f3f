#pragma once

#include "secure_game/linalg.hpp"

#include <string>

namespace secure_game {

/// Discrete-time LTI plant x_{k+1} = A x_k + B u_k + w_k, y_k = C x_k + v_k
/// with w ~ N(0, Q), v ~ N(0, R) and x_0 ~ N(x0_mean, x0_cov).
struct PlantModel {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix Q;
  Matrix R;
  Vector x0_mean;
  Matrix x0_cov;

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index input_dim() const { return B.cols(); }
  Eigen::Index output_dim() const { return C.rows(); }

  void validate() const {
    const Eigen::Index n = A.rows();
    const Eigen::Index p = B.cols();
    const Eigen::Index m = C.rows();
    if (A.cols() != n) throw DimensionError("PlantModel: A must be square");
    if (B.rows() != n) throw DimensionError("PlantModel: B must have n rows");
    if (C.cols() != n) throw DimensionError("PlantModel: C must have n columns");
    if (Q.rows() != n || Q.cols() != n) throw DimensionError("PlantModel: Q must be n x n");
    if (R.rows() != m || R.cols() != m) throw DimensionError("PlantModel: R must be m x m");
    if (x0_mean.size() != n) throw DimensionError("PlantModel: x0_mean must have length n");
    if (x0_cov.rows() != n || x0_cov.cols() != n) {
      throw DimensionError("PlantModel: x0_cov must be n x n");
    }
    if (p < 1 || m < 1 || n < 1) throw DimensionError("PlantModel: empty dimension");
    require_psd(Q, "PlantModel: Q");
    require_pd(R, "PlantModel: R");
    require_psd(x0_cov, "PlantModel: x0_cov");
  }
};

/// Quadratic stage-cost weights x^T W x + u^T U u.
struct LqgWeights {
  Matrix W;
  Matrix U;

  void validate(Eigen::Index n, Eigen::Index p) const {
    if (W.rows() != n || W.cols() != n) throw DimensionError("LqgWeights: W must be n x n");
    if (U.rows() != p || U.cols() != p) throw DimensionError("LqgWeights: U must be p x p");
    require_psd(W, "LqgWeights: W");
    require_pd(U, "LqgWeights: U");
  }
};

/// Fixed-point solution of the discrete algebraic Riccati equation
///   S = A^T S A + Q - A^T S B (B^T S B + R)^-1 B^T S A,
/// iterated with explicit symmetrization each step. The returned S is
/// checked against the fixed-point residual independently of the
/// iteration's own stopping rule.
inline Matrix solve_dare(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                         double tol = 1e-10, int max_iter = 10000) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw DimensionError("solve_dare: A must be square");
  if (b.rows() != n) throw DimensionError("solve_dare: B must have n rows");
  const Eigen::Index p = b.cols();
  if (q.rows() != n || q.cols() != n) throw DimensionError("solve_dare: Q must be n x n");
  if (r.rows() != p || r.cols() != p) throw DimensionError("solve_dare: R must be p x p");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_dare: tol must be positive");

  auto step = [&](const Matrix& s) {
    const Matrix bsa = b.transpose() * s * a;                    // p x n
    const Matrix gram = symmetrize(b.transpose() * s * b + r);   // p x p
    return symmetrize(a.transpose() * s * a + q -
                      bsa.transpose() * LuDecomposition(gram).solve(bsa));
  };

  Matrix s = symmetrize(q);
  double resid = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    const Matrix next = step(s);
    resid = (next - s).cwiseAbs().maxCoeff();
    s = next;
    if (resid <= 0.1 * tol) break;
  }
  resid = (s - step(s)).cwiseAbs().maxCoeff();
  if (!(resid <= tol)) {
    throw NonConvergentError("solve_dare: residual " + std::to_string(resid) + " exceeds tol");
  }
  return s;
}

struct KalmanDesign {
  Matrix K;   // steady-state gain, n x m
  Matrix P;   // prediction covariance, n x n
  Matrix Pz;  // innovation covariance C P C^T + R, m x m
};

/// Steady-state Kalman filter for the plant; the filter DARE is the
/// control DARE of the dual pair (A^T, C^T).
inline KalmanDesign kalman_gain(const PlantModel& plant, double tol = 1e-10,
                                int max_iter = 10000) {
  const Matrix p = solve_dare(plant.A.transpose(), plant.C.transpose(), plant.Q, plant.R, tol,
                              max_iter);
  const Matrix pz = symmetrize(plant.C * p * plant.C.transpose() + plant.R);
  // K = P C^T Pz^-1, via Pz X = C P^T  =>  K = X^T.
  const Matrix k = LuDecomposition(pz).solve(Matrix(plant.C * p.transpose())).transpose();
  return {k, p, pz};
}

/// Infinite-horizon LQR gain L = -(B^T S B + U)^-1 B^T S A so that
/// u = L x yields a stable A + B L.
inline Matrix lqr_gain(const PlantModel& plant, const LqgWeights& weights, double tol = 1e-10,
                       int max_iter = 10000) {
  const Matrix s = solve_dare(plant.A, plant.B, weights.W, weights.U, tol, max_iter);
  const Matrix gram = symmetrize(plant.B.transpose() * s * plant.B + weights.U);
  return -LuDecomposition(gram).solve(Matrix(plant.B.transpose() * s * plant.A));
}

struct Discretized {
  Matrix A;
  Matrix B;
};

/// Zero-order-hold discretization through the augmented-matrix exponential
/// exp([[Ac, Bc], [0, 0]] Ts) = [[Ad, Bd], [0, I]].
inline Discretized discretize_zoh(const Matrix& a_cont, const Matrix& b_cont, double ts) {
  const Eigen::Index n = a_cont.rows();
  if (a_cont.cols() != n) throw DimensionError("discretize_zoh: A must be square");
  if (b_cont.rows() != n) throw DimensionError("discretize_zoh: B must have n rows");
  if (!(ts > 0.0)) throw std::invalid_argument("discretize_zoh: Ts must be positive");
  const Eigen::Index p = b_cont.cols();
  Matrix aug = Matrix::Zero(n + p, n + p);
  aug.topLeftCorner(n, n) = a_cont;
  aug.topRightCorner(n, p) = b_cont;
  const Matrix phi = matrix_exp(aug * ts);
  return {phi.topLeftCorner(n, n), phi.topRightCorner(n, p)};
}

}  // namespace secure_game
