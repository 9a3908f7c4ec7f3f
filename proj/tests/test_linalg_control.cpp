#include "secure_game/control.hpp"
#include "secure_game/linalg.hpp"
#include "secure_game/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace sg = secure_game;

namespace {

sg::Matrix batch_reactor_a_cont() {
  sg::Matrix a(4, 4);
  a << 1.38, -0.2077, 6.715, -5.676,  //
      -0.5814, -4.29, 0.0, 0.675,     //
      1.067, 4.273, -6.654, 5.893,    //
      0.048, 4.273, 1.343, -2.104;
  return a;
}

sg::Matrix batch_reactor_b_cont() {
  sg::Matrix b(4, 2);
  b << 0.0, 0.0,  //
      5.679, 0.0,  //
      1.136, -3.14,  //
      1.136, 0.0;
  return b;
}

sg::Matrix batch_reactor_c() {
  sg::Matrix c(2, 4);
  c << 1.0, 0.0, 1.0, -1.0,  //
      0.0, 1.0, 0.0, 0.0;
  return c;
}

sg::PlantModel batch_reactor_plant(double ts) {
  const auto d = sg::discretize_zoh(batch_reactor_a_cont(), batch_reactor_b_cont(), ts);
  sg::PlantModel plant;
  plant.A = d.A;
  plant.B = d.B;
  plant.C = batch_reactor_c();
  plant.Q = sg::Matrix::Identity(4, 4) * 0.1;
  plant.R = sg::Matrix::Identity(2, 2) * 0.1;
  plant.x0_mean = sg::Vector::Zero(4);
  plant.x0_cov = sg::Matrix::Identity(4, 4);
  plant.validate();
  return plant;
}

// Independent fixed-point oracle for the scalar DARE, kept free of the
// production iteration (no symmetrization, plain recursion on doubles).
double scalar_dare_oracle(double a, double b, double q, double r) {
  double s = q;
  for (int it = 0; it < 200000; ++it) {
    const double next = a * s * a + q - a * s * b * (1.0 / (b * s * b + r)) * b * s * a;
    if (std::abs(next - s) < 1e-15) return next;
    s = next;
  }
  return s;
}

TEST(LuDecomposition, SolvesAndDetectsSingular) {
  sg::Matrix a(3, 3);
  a << 4, 1, 0, 1, 3, 1, 0, 1, 2;
  sg::Vector b(3);
  b << 1, 2, 3;
  const sg::Vector x = sg::solve_linear(a, b);
  EXPECT_LT((a * x - b).cwiseAbs().maxCoeff(), 1e-12);

  sg::Matrix singular(2, 2);
  singular << 1, 2, 2, 4;
  EXPECT_THROW(sg::LuDecomposition{singular}, sg::SingularMatrixError);

  sg::Matrix rect(2, 3);
  rect.setZero();
  EXPECT_THROW(sg::LuDecomposition{rect}, sg::DimensionError);
}

TEST(LuDecomposition, InverseMatchesIdentity) {
  sg::Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    sg::Matrix a(5, 5);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) a(i, j) = rng.normal();
    }
    a += 6.0 * sg::Matrix::Identity(5, 5);
    const sg::Matrix inv = sg::inverse(a);
    EXPECT_LT((a * inv - sg::Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(SpectralRadius, KnownValues) {
  sg::Matrix rot(2, 2);
  rot << 0.0, -0.9, 0.9, 0.0;  // complex pair of magnitude 0.9
  EXPECT_NEAR(sg::spectral_radius(rot), 0.9, 1e-9);

  sg::Matrix diag = sg::Matrix::Zero(3, 3);
  diag(0, 0) = -2.5;
  diag(1, 1) = 0.3;
  EXPECT_NEAR(sg::spectral_radius(diag), 2.5, 1e-9);

  sg::Matrix nil(2, 2);
  nil << 0, 1, 0, 0;
  EXPECT_NEAR(sg::spectral_radius(nil), 0.0, 1e-12);
}

TEST(MatrixExp, MatchesClosedForms) {
  const sg::Matrix z = sg::matrix_exp(sg::Matrix::Zero(3, 3));
  EXPECT_LT((z - sg::Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-14);

  sg::Matrix a(1, 1);
  a << 1.0;
  EXPECT_NEAR(sg::matrix_exp(a * 0.1)(0, 0), std::exp(0.1), 1e-12);

  // Rotation generator: exp([[0,-t],[t,0]]) = [[cos t, -sin t],[sin t, cos t]].
  sg::Matrix g(2, 2);
  g << 0.0, -1.3, 1.3, 0.0;
  const sg::Matrix r = sg::matrix_exp(g);
  EXPECT_NEAR(r(0, 0), std::cos(1.3), 1e-12);
  EXPECT_NEAR(r(1, 0), std::sin(1.3), 1e-12);
}

TEST(SolveDare, TrivialAndScalarOracle) {
  sg::Matrix a(1, 1), b(1, 1), q(1, 1), r(1, 1);
  a << 0.0;
  b << 1.0;
  q << 1.0;
  r << 1.0;
  EXPECT_NEAR(sg::solve_dare(a, b, q, r)(0, 0), 1.0, 1e-12);

  a << 0.5;
  const double oracle = scalar_dare_oracle(0.5, 1.0, 1.0, 1.0);
  const double s = sg::solve_dare(a, b, q, r)(0, 0);
  EXPECT_NEAR(s, oracle, 1e-9);
  // Closed form: the positive root of S^2 - 0.25 S - 1 = 0.
  EXPECT_NEAR(s, 0.125 + std::sqrt(0.015625 + 1.0), 1e-10);
}

TEST(SolveDare, ResidualPostconditionHolds) {
  sg::Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    sg::Matrix a(3, 3), b(3, 2);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) a(i, j) = 0.4 * rng.normal();
      for (int j = 0; j < 2; ++j) b(i, j) = rng.normal();
    }
    const sg::Matrix q = sg::Matrix::Identity(3, 3);
    const sg::Matrix r = sg::Matrix::Identity(2, 2);
    const sg::Matrix s = sg::solve_dare(a, b, q, r);
    // Residual recomputed here, independently of the iteration's stop rule.
    const sg::Matrix bsb = b.transpose() * s * b + r;
    const sg::Matrix bsa = b.transpose() * s * a;
    const sg::Matrix fs =
        a.transpose() * s * a + q - bsa.transpose() * sg::solve_linear(bsb, bsa);
    EXPECT_LE((s - fs).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SolveDare, ReportsNonConvergence) {
  // Undetectable/unstabilizable pair: A = 2 (unstable), B = 0.
  sg::Matrix a(1, 1), b(1, 1), q(1, 1), r(1, 1);
  a << 2.0;
  b << 0.0;
  q << 1.0;
  r << 1.0;
  EXPECT_THROW(sg::solve_dare(a, b, q, r, 1e-10, 200), sg::NonConvergentError);
}

TEST(KalmanGain, ScalarClosedFormAndLimit) {
  sg::PlantModel p;
  p.A = sg::Matrix::Zero(1, 1);
  p.B = sg::Matrix::Identity(1, 1);
  p.C = sg::Matrix::Identity(1, 1);
  p.Q = sg::Matrix::Identity(1, 1) * 2.0;
  p.R = sg::Matrix::Identity(1, 1);
  p.x0_mean = sg::Vector::Zero(1);
  p.x0_cov = sg::Matrix::Identity(1, 1);
  p.validate();
  const auto kd = sg::kalman_gain(p);
  EXPECT_NEAR(kd.P(0, 0), 2.0, 1e-10);
  EXPECT_NEAR(kd.K(0, 0), 2.0 / 3.0, 1e-10);
  EXPECT_NEAR(kd.Pz(0, 0), 3.0, 1e-10);

  // R large with the same P drives the gain to zero.
  p.R(0, 0) = 1e9;
  const auto kd2 = sg::kalman_gain(p);
  EXPECT_LT(std::abs(kd2.K(0, 0)), 1e-6);
}

TEST(LqrGain, ScalarAndZeroA) {
  sg::PlantModel p;
  p.A = sg::Matrix::Zero(1, 1);
  p.B = sg::Matrix::Identity(1, 1);
  p.C = sg::Matrix::Identity(1, 1);
  p.Q = sg::Matrix::Identity(1, 1);
  p.R = sg::Matrix::Identity(1, 1);
  p.x0_mean = sg::Vector::Zero(1);
  p.x0_cov = sg::Matrix::Identity(1, 1);
  sg::LqgWeights w{sg::Matrix::Identity(1, 1), sg::Matrix::Identity(1, 1)};
  EXPECT_NEAR(sg::lqr_gain(p, w)(0, 0), 0.0, 1e-12);

  p.A(0, 0) = 0.5;
  const double s = scalar_dare_oracle(0.5, 1.0, 1.0, 1.0);
  EXPECT_NEAR(sg::lqr_gain(p, w)(0, 0), -0.5 * s / (s + 1.0), 1e-9);
}

TEST(DiscretizeZoh, ClosedFormsAndSemigroup) {
  const auto d0 = sg::discretize_zoh(sg::Matrix::Zero(2, 2), sg::Matrix::Identity(2, 2), 0.1);
  EXPECT_LT((d0.A - sg::Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((d0.B - 0.1 * sg::Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-14);

  sg::Matrix a(1, 1), b(1, 1);
  a << 1.0;
  b << 1.0;
  const auto d1 = sg::discretize_zoh(a, b, 0.1);
  EXPECT_NEAR(d1.A(0, 0), std::exp(0.1), 1e-12);
  EXPECT_NEAR(d1.B(0, 0), std::exp(0.1) - 1.0, 1e-12);

  // Composing two half-length steps equals one full step.
  const auto ac = batch_reactor_a_cont();
  const auto bc = batch_reactor_b_cont();
  const auto half = sg::discretize_zoh(ac, bc, 0.5);
  const auto full = sg::discretize_zoh(ac, bc, 1.0);
  const sg::Matrix a2 = half.A * half.A;
  const sg::Matrix b2 = half.A * half.B + half.B;
  EXPECT_LT((a2 - full.A).cwiseAbs().maxCoeff(), 1e-9 * full.A.cwiseAbs().maxCoeff());
  EXPECT_LT((b2 - full.B).cwiseAbs().maxCoeff(), 1e-9 * full.B.cwiseAbs().maxCoeff());

  EXPECT_THROW(sg::discretize_zoh(ac, bc, 0.0), std::invalid_argument);
}

TEST(BatchReactor, SynthesisIsStabilizing) {
  const auto plant = batch_reactor_plant(1.0);
  sg::LqgWeights w{sg::Matrix::Identity(4, 4), sg::Matrix::Identity(2, 2)};

  const sg::Matrix l = sg::lqr_gain(plant, w);
  const auto kd = sg::kalman_gain(plant);

  // Eigenvalue oracle: closed-loop and filter spectral radii strictly < 1.
  EXPECT_LT(sg::spectral_radius(plant.A + plant.B * l), 1.0);
  EXPECT_LT(sg::spectral_radius(plant.A - plant.A * kd.K * plant.C), 1.0);
}

TEST(SolveDiscreteLyapunov, FixedPointResidual) {
  sg::Matrix m(2, 2);
  m << 0.5, 0.1, -0.2, 0.3;
  const sg::Matrix c = sg::Matrix::Identity(2, 2);
  const sg::Matrix x = sg::solve_discrete_lyapunov(m, c);
  EXPECT_LT((x - m * x * m.transpose() - c).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CholeskyPsd, SemidefiniteAndIndefinite) {
  sg::Matrix psd(2, 2);
  psd << 1.0, 1.0, 1.0, 1.0;  // rank one
  const sg::Matrix l = sg::cholesky_psd(psd);
  EXPECT_LT((l * l.transpose() - psd).cwiseAbs().maxCoeff(), 1e-10);

  sg::Matrix indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(sg::cholesky_psd(indef), sg::NotPsdError);
}

}  // namespace
