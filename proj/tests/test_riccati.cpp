#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "robolin/riccati.hpp"

namespace robolin::riccati {
namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) M(i, j) = n(rng);
  }
  return M;
}

Eigen::MatrixXd m1(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

TEST(Care, ScalarQuadraticFormula) {
  // 2X - X^2 + 1 = 0, stabilizing root
  const auto s = solve_care({m1(1), m1(1), m1(1)});
  EXPECT_NEAR(s.X(0, 0), 1 + std::sqrt(2.0), 1e-9);
  EXPECT_LT(s.abscissa, 0);
}

TEST(Care, PureQuadratic) {
  const auto s = solve_care({m1(0), m1(1), m1(4)});
  EXPECT_NEAR(s.X(0, 0), 2.0, 1e-12);
}

TEST(Care, DecoupledDiagonal) {
  Eigen::MatrixXd A = Eigen::Vector2d(1.0, -3.0).asDiagonal();
  Eigen::MatrixXd M = Eigen::Vector2d(1.0, 2.0).asDiagonal();
  Eigen::MatrixXd Q = Eigen::Vector2d(1.0, 5.0).asDiagonal();
  const auto s = solve_care({A, M, Q});
  for (int i = 0; i < 2; ++i) {
    const double a = A(i, i), m = M(i, i), q = Q(i, i);
    EXPECT_NEAR(s.X(i, i), (a + std::sqrt(a * a + m * q)) / m, 1e-10);
  }
  EXPECT_NEAR(s.X(0, 1), 0.0, 1e-12);
}

TEST(Care, RandomDefiniteProblems) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd A = random_matrix(rng, 4, 4);
    const Eigen::MatrixXd B = random_matrix(rng, 4, 2);
    const Eigen::MatrixXd C = random_matrix(rng, 3, 4);
    const CareProblem p{A, B * B.transpose(), C.transpose() * C + 0.1 * Eigen::MatrixXd::Identity(4, 4)};
    const auto s = solve_care(p);
    EXPECT_LE(care_residual(p, s.X), 1e-8);
    EXPECT_TRUE(is_hurwitz(p.A - p.M * s.X));
    EXPECT_LE((s.X - s.X.transpose()).norm(), 1e-10 * s.X.norm());
  }
}

TEST(Care, IndefiniteQuadraticTerm) {
  // H-infinity style: M = BB' - g^-2 EE' with feasible g
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd A = random_matrix(rng, 3, 3) - 3 * Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd B = random_matrix(rng, 3, 1), E = random_matrix(rng, 3, 1);
  const CareProblem p{A, B * B.transpose() - 0.01 * E * E.transpose(), Eigen::MatrixXd::Identity(3, 3)};
  const auto s = solve_care(p);
  EXPECT_LE(s.residual, 1e-9 * (1 + s.X.squaredNorm()));
  EXPECT_LT(s.abscissa, 0);
}

TEST(Care, ImaginaryAxisReported) {
  EXPECT_THROW(solve_care({m1(0), m1(0), m1(0)}), ImaginaryAxisEigenvalue);
  // H = [[0,1],[-1,0]] has eigenvalues +-j
  EXPECT_THROW(solve_care({m1(0), m1(-1), m1(1)}), ImaginaryAxisEigenvalue);
}

TEST(Lyapunov, SolvesSmallSystem) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd F = random_matrix(rng, 3, 3) - 4 * Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd W = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd Z = solve_lyapunov(F, W);
  EXPECT_LE((F.transpose() * Z + Z * F + W).norm(), 1e-12);
}

TEST(HinfNorm, FirstOrderLag) {
  EXPECT_NEAR(hinf_norm(m1(-1), m1(1), m1(1), m1(0)), 1.0, 1e-6);
}

TEST(HinfNorm, StaticGain) {
  EXPECT_NEAR(hinf_norm(m1(-1), m1(0), m1(0), m1(0.5)), 0.5, 1e-6);
}

TEST(HinfNorm, LagPlusFeedthrough) {
  EXPECT_NEAR(hinf_norm(m1(-1), m1(1), m1(1), m1(1)), 2.0, 2e-6);
}

TEST(HinfNorm, UnstableRejected) {
  EXPECT_THROW(hinf_norm(m1(1), m1(1), m1(1), m1(0)), UnstableSystem);
}

TEST(HinfNorm, ResonantPeak) {
  // lightly damped oscillator, peak 1/(2 zeta sqrt(1 - zeta^2)) at wn = 1
  const double z = 0.05;
  Eigen::MatrixXd A(2, 2);
  A << 0, 1, -1, -2 * z;
  const Eigen::MatrixXd B = Eigen::Vector2d(0, 1), C = Eigen::RowVector2d(1, 0);
  EXPECT_NEAR(hinf_norm(A, B, C, m1(0)), 1 / (2 * z * std::sqrt(1 - z * z)), 1e-5);
}

TEST(HinfNorm, AgreesWithFrequencyGrid) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd A = random_matrix(rng, 4, 4);
    A -= (spectral_abscissa(A) + 0.3) * Eigen::MatrixXd::Identity(4, 4);
    const Eigen::MatrixXd B = random_matrix(rng, 4, 2), C = random_matrix(rng, 2, 4), D = 0.1 * random_matrix(rng, 2, 2);
    double grid = 0.0;
    for (int k = 0; k < 10000; ++k) {
      const double w = std::pow(10.0, -3.0 + 6.0 * k / 9999.0);
      grid = std::max(grid, sigma_max_at(A, B, C, D, w));
    }
    grid = std::max(grid, sigma_max_at(A, B, C, D, 0.0));
    const double h = hinf_norm(A, B, C, D);
    EXPECT_NEAR(h, grid, 1e-4 * grid);
    EXPECT_GE(h, grid * (1 - 1e-6));
  }
}

TEST(Predicates, Identity) {
  const auto p = matrix_predicates(Eigen::MatrixXd::Identity(3, 3));
  EXPECT_TRUE(p.is_pd);
  EXPECT_TRUE(p.is_psd);
  EXPECT_DOUBLE_EQ(p.spectral_norm, 1.0);
}

TEST(Predicates, NilpotentNotHurwitz) {
  Eigen::MatrixXd N(2, 2);
  N << 0, 1, 0, 0;
  EXPECT_FALSE(matrix_predicates(N).is_hurwitz);
  EXPECT_FALSE(matrix_predicates(N).is_symmetric);
}

TEST(Predicates, TriangularStable) {
  Eigen::MatrixXd M(2, 2);
  M << -1, 4, 0, -2;
  const auto p = matrix_predicates(M);
  EXPECT_TRUE(p.is_hurwitz);
  // sigma^2 are roots of s^2 - 21 s + 4 = 0
  const double oracle = std::sqrt((21 + std::sqrt(21.0 * 21.0 - 16)) / 2);
  EXPECT_NEAR(p.spectral_norm, oracle, 1e-12);
  EXPECT_NEAR(p.spectral_norm, 4.561553, 1e-6);
}

TEST(Predicates, SemidefiniteBoundary) {
  const Eigen::MatrixXd S = Eigen::Vector2d(1.0, 0.0).asDiagonal();
  const auto p = matrix_predicates(S);
  EXPECT_TRUE(p.is_psd);
  EXPECT_FALSE(p.is_pd);
}

}  // namespace
}  // namespace robolin::riccati
