#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace secure_game {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonConvergentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotPsdError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

inline bool is_symmetric(const Matrix& a, double tol = 1e-9) {
  if (a.rows() != a.cols()) return false;
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * (1.0 + a.cwiseAbs().maxCoeff());
}

/// Dense LU factorization with partial pivoting. A pivot smaller than
/// 1e-12 of the max magnitude of its (original) row is treated as singular
/// and raises SingularMatrixError instead of being regularized.
class LuDecomposition {
 public:
  explicit LuDecomposition(Matrix a) : lu_(std::move(a)) {
    const Eigen::Index n = lu_.rows();
    if (n != lu_.cols()) throw DimensionError("LuDecomposition: matrix must be square");
    perm_.resize(static_cast<std::size_t>(n));
    std::vector<double> row_scale(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      perm_[static_cast<std::size_t>(i)] = i;
      row_scale[static_cast<std::size_t>(i)] = lu_.row(i).cwiseAbs().maxCoeff();
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      Eigen::Index piv = k;
      double best = std::abs(lu_(k, k));
      for (Eigen::Index i = k + 1; i < n; ++i) {
        const double v = std::abs(lu_(i, k));
        if (v > best) {
          best = v;
          piv = i;
        }
      }
      if (piv != k) {
        lu_.row(piv).swap(lu_.row(k));
        std::swap(perm_[static_cast<std::size_t>(piv)], perm_[static_cast<std::size_t>(k)]);
        std::swap(row_scale[static_cast<std::size_t>(piv)], row_scale[static_cast<std::size_t>(k)]);
      }
      const double scale = row_scale[static_cast<std::size_t>(k)];
      if (best == 0.0 || best < kPivotTol * scale) {
        throw SingularMatrixError("LuDecomposition: singular pivot at column " +
                                  std::to_string(k));
      }
      for (Eigen::Index i = k + 1; i < n; ++i) {
        lu_(i, k) /= lu_(k, k);
        lu_.row(i).tail(n - k - 1) -= lu_(i, k) * lu_.row(k).tail(n - k - 1);
      }
    }
  }

  Vector solve(const Vector& b) const {
    const Eigen::Index n = lu_.rows();
    if (b.size() != n) throw DimensionError("LuDecomposition::solve: size mismatch");
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = b(perm_[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < i; ++j) acc -= lu_(i, j) * y(j);
      y(i) = acc;
    }
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      double acc = y(i);
      for (Eigen::Index j = i + 1; j < n; ++j) acc -= lu_(i, j) * y(j);
      y(i) = acc / lu_(i, i);
    }
    return y;
  }

  Matrix solve(const Matrix& b) const {
    if (b.rows() != lu_.rows()) throw DimensionError("LuDecomposition::solve: size mismatch");
    Matrix x(b.rows(), b.cols());
    for (Eigen::Index c = 0; c < b.cols(); ++c) x.col(c) = solve(Vector(b.col(c)));
    return x;
  }

 private:
  static constexpr double kPivotTol = 1e-12;
  Matrix lu_;
  std::vector<Eigen::Index> perm_;
};

inline Vector solve_linear(const Matrix& a, const Vector& b) {
  return LuDecomposition(a).solve(b);
}

inline Matrix solve_linear(const Matrix& a, const Matrix& b) {
  return LuDecomposition(a).solve(b);
}

inline Matrix inverse(const Matrix& a) {
  return LuDecomposition(a).solve(Matrix(Matrix::Identity(a.rows(), a.cols())));
}

/// Spectral radius via normalized repeated squaring:
/// rho(A) = lim_k ||A^(2^k)||^(1/2^k). Exact through complex spectra since
/// only norms are taken; 48 squarings leave a relative error below 1e-12
/// for any fixed eigenbasis conditioning.
inline double spectral_radius(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("spectral_radius: matrix must be square");
  if (a.rows() == 0) return 0.0;
  double nrm = a.norm();
  if (nrm == 0.0 || !std::isfinite(nrm)) return nrm;
  Matrix m = a / nrm;
  double acc = std::log(nrm);
  double w = 0.5;
  for (int it = 0; it < 48; ++it) {
    m = (m * m).eval();
    nrm = m.norm();
    if (nrm < 1e-300) return 0.0;
    acc += w * std::log(nrm);
    m /= nrm;
    w *= 0.5;
  }
  return std::exp(acc);
}

/// Matrix exponential by scaling-and-squaring of the truncated Taylor
/// series; terms are accumulated until they fall below 1e-16 of the
/// running sum, well inside the 1e-10 relative target.
inline Matrix matrix_exp(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("matrix_exp: matrix must be square");
  const Eigen::Index n = a.rows();
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  Matrix scaled = a;
  if (norm > 0.5) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    scaled /= std::ldexp(1.0, squarings);
  }
  Matrix sum = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int k = 1; k <= 64; ++k) {
    term = (term * scaled / static_cast<double>(k)).eval();
    sum += term;
    if (term.cwiseAbs().maxCoeff() <= 1e-16 * sum.cwiseAbs().maxCoeff()) break;
  }
  for (int i = 0; i < squarings; ++i) sum = (sum * sum).eval();
  return sum;
}

/// Solves the Stein equation X = M X M^T + C by doubling; requires
/// rho(M) < 1.
inline Matrix solve_discrete_lyapunov(const Matrix& m, const Matrix& c, double tol = 1e-12,
                                      int max_iter = 200) {
  if (m.rows() != m.cols() || c.rows() != c.cols() || m.rows() != c.rows()) {
    throw DimensionError("solve_discrete_lyapunov: inconsistent dimensions");
  }
  Matrix x = symmetrize(c);
  Matrix ak = m;
  for (int it = 0; it < max_iter; ++it) {
    x = symmetrize(x + ak * x * ak.transpose());
    ak = (ak * ak).eval();
    const double tail = ak.cwiseAbs().maxCoeff();
    if (!std::isfinite(tail)) {
      throw NonConvergentError("solve_discrete_lyapunov: iteration diverged (rho(M) >= 1?)");
    }
    if (tail < 1e-150) break;
  }
  const double resid = (x - m * x * m.transpose() - c).cwiseAbs().maxCoeff();
  if (!(resid <= tol * (1.0 + x.cwiseAbs().maxCoeff()))) {
    throw NonConvergentError("solve_discrete_lyapunov: residual " + std::to_string(resid));
  }
  return x;
}

/// Lower Cholesky factor of a symmetric PSD matrix. Null directions get a
/// zero column; an indefinite input raises NotPsdError.
inline Matrix cholesky_psd(const Matrix& a, double tol = 1e-10) {
  if (a.rows() != a.cols()) throw DimensionError("cholesky_psd: matrix must be square");
  if (!is_symmetric(a, 1e-8)) throw NotPsdError("cholesky_psd: matrix is not symmetric");
  const Eigen::Index n = a.rows();
  const double scale = n > 0 ? std::max(1.0, a.cwiseAbs().maxCoeff()) : 1.0;
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (d < -tol * scale) throw NotPsdError("cholesky_psd: matrix is not positive semidefinite");
    if (d <= tol * scale) {
      l(j, j) = 0.0;
      continue;
    }
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return l;
}

inline void require_psd(const Matrix& a, const std::string& name, double tol = 1e-10) {
  try {
    cholesky_psd(a, tol);
  } catch (const NotPsdError&) {
    throw NotPsdError(name + " must be symmetric positive semidefinite");
  }
}

inline void require_pd(const Matrix& a, const std::string& name) {
  require_psd(a, name);
  try {
    LuDecomposition lu(a);
    (void)lu;
  } catch (const SingularMatrixError&) {
    throw NotPsdError(name + " must be positive definite");
  }
}

}  // namespace secure_game
