#include "secure_game/matrix_game.hpp"
#include "secure_game/rng.hpp"

#include <gtest/gtest.h>

namespace sg = secure_game;

namespace {

sg::Matrix random_matrix(sg::Rng& rng, int max_dim, double lo, double hi) {
  const int m = 1 + static_cast<int>(rng.uniform() * max_dim);
  const int n = 1 + static_cast<int>(rng.uniform() * max_dim);
  sg::Matrix q(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) q(i, j) = lo + (hi - lo) * rng.uniform();
  }
  return q;
}

void expect_saddle(const sg::Matrix& q, const sg::GameSolution& sol, double eps = 1e-8) {
  // f* guarantees at least value against every pure column, g* concedes at
  // most value against every pure row.
  EXPECT_GE((q.transpose() * sol.f_star).minCoeff(), sol.value - eps);
  EXPECT_LE((q * sol.g_star).maxCoeff(), sol.value + eps);
  EXPECT_LE(sol.duality_gap, eps);
  EXPECT_NEAR(sol.f_star.sum(), 1.0, 1e-9);
  EXPECT_NEAR(sol.g_star.sum(), 1.0, 1e-9);
  EXPECT_GE(sol.f_star.minCoeff(), 0.0);
  EXPECT_GE(sol.g_star.minCoeff(), 0.0);
}

TEST(SolveZeroSum, ClosedForms) {
  sg::Matrix one(1, 1);
  one << -4.2;
  const auto s1 = sg::solve_zero_sum(one);
  EXPECT_NEAR(s1.value, -4.2, 1e-12);
  EXPECT_NEAR(s1.f_star(0), 1.0, 1e-12);
  EXPECT_NEAR(s1.g_star(0), 1.0, 1e-12);

  sg::Matrix pennies(2, 2);
  pennies << 1, -1, -1, 1;
  const auto s2 = sg::solve_zero_sum(pennies);
  EXPECT_NEAR(s2.value, 0.0, 1e-9);
  EXPECT_NEAR(s2.f_star(0), 0.5, 1e-9);
  EXPECT_NEAR(s2.g_star(0), 0.5, 1e-9);

  // 2x2 indifference closed form: value 5/3, strategies (1/3, 2/3).
  sg::Matrix q(2, 2);
  q << 3, 1, 1, 2;
  const auto s3 = sg::solve_zero_sum(q);
  EXPECT_NEAR(s3.value, 5.0 / 3.0, 1e-9);
  EXPECT_NEAR(s3.f_star(0), 1.0 / 3.0, 1e-9);
  EXPECT_NEAR(s3.g_star(0), 1.0 / 3.0, 1e-9);
  expect_saddle(q, s3);
}

TEST(SolveZeroSum, SaddleCertificateOnRandomMatrices) {
  sg::Rng rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const sg::Matrix q = random_matrix(rng, 12, -10.0, 10.0);
    const auto sol = sg::solve_zero_sum(q);
    expect_saddle(q, sol);
  }
}

TEST(SolveZeroSum, ShiftInvariance) {
  sg::Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const sg::Matrix q = random_matrix(rng, 8, -5.0, 5.0);
    const double c = -7.5 + 15.0 * rng.uniform();
    const sg::Matrix shifted = q.array() + c;
    const auto a = sg::solve_zero_sum(q);
    const auto b = sg::solve_zero_sum(shifted);
    EXPECT_NEAR(b.value, a.value + c, 1e-8);
  }
}

TEST(SolveZeroSum, TransposeDuality) {
  sg::Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const sg::Matrix q = random_matrix(rng, 8, -5.0, 5.0);
    // Swapping roles negates and transposes the payoff.
    const auto a = sg::solve_zero_sum(q);
    const auto b = sg::solve_zero_sum(sg::Matrix(-q.transpose()));
    EXPECT_NEAR(b.value, -a.value, 1e-8);
  }
}

TEST(SolveZeroSum, RejectsBadInput) {
  sg::Matrix inf(1, 2);
  inf << 1.0, std::numeric_limits<double>::infinity();
  EXPECT_THROW(sg::solve_zero_sum(inf), std::invalid_argument);
  EXPECT_THROW(sg::solve_zero_sum(sg::Matrix(0, 0)), sg::DimensionError);
}

TEST(FictitiousPlay, MatchingPenniesRate) {
  sg::Matrix pennies(2, 2);
  pennies << 1, -1, -1, 1;
  const auto fp = sg::solve_zero_sum_reference(pennies, 100000);
  EXPECT_LE(std::abs(fp.value), 0.02);
}

TEST(FictitiousPlay, OneShotExact) {
  sg::Matrix one(1, 1);
  one << 3.25;
  const auto fp = sg::solve_zero_sum_reference(one, 1);
  EXPECT_NEAR(fp.value, 3.25, 1e-12);
  EXPECT_NEAR(fp.duality_gap, 0.0, 1e-12);
}

TEST(FictitiousPlay, CrossChecksLpOnRandomFiveByFive) {
  sg::Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    sg::Matrix q(5, 5);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) q(i, j) = -10.0 + 20.0 * rng.uniform();
    }
    const auto lp = sg::solve_zero_sum(q);
    const auto fp = sg::solve_zero_sum_reference(q, 100000);
    EXPECT_LE(std::abs(lp.value - fp.value), 0.05);
  }
}

}  // namespace
