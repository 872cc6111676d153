#include <gtest/gtest.h>

#include <omp.h>

#include <cmath>
#include <complex>
#include <random>

#include "robolin/minimax.hpp"
#include "robolin/riccati.hpp"
#include "support/lqg_oracle.hpp"

namespace robolin::minimax {
namespace {

using Eigen::MatrixXd;

using testing::oracle_care;
using testing::oracle_lqg;
using testing::random_certain_model;

SynthesisWeights unit_weights(Eigen::Index n, Eigen::Index k) {
  return {MatrixXd::Identity(n, n), MatrixXd::Identity(k, k)};
}

double rel(const MatrixXd& a, const MatrixXd& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

LinearizedDesignModel scalar_demo(double rho) {
  meanval::AssemblyConventions conv;
  conv.measured = {0};
  return meanval::assemble_design_model(feedlin::brunovsky_form({{1}}, false), rho, conv);
}

LinearizedDesignModel double_integrator(double rho) {
  meanval::AssemblyConventions conv;
  conv.measured = {0, 1};
  return meanval::assemble_design_model(feedlin::brunovsky_form({{2}}, true), rho, conv);
}

TEST(MinimaxPair, LqgLimitMatchesClassicalAres) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto m = random_certain_model(seed);
    const auto w = unit_weights(4, 2);
    const auto o = oracle_lqg(m, w);
    const auto c = solve_design_pair(m, w, 1e11);
    ASSERT_TRUE(c.feasible()) << c.reason;
    EXPECT_LT(rel(c.X, o.P), 1e-6);
    EXPECT_LT(rel(c.Y, o.S), 1e-6);
  }
}

TEST(MinimaxPair, ScalarControlEquation) {
  LinearizedDesignModel m;
  m.A = MatrixXd::Constant(1, 1, -1.0);
  m.B1 = m.B2 = m.C2 = m.D2 = MatrixXd::Ones(1, 1);
  m.C1 = m.D1 = MatrixXd::Zero(1, 1);
  const auto c = solve_design_pair(m, unit_weights(1, 1), 1e10);
  // -2X - X^2 + 1 = 0
  EXPECT_NEAR(c.X(0, 0), std::sqrt(2.0) - 1.0, 1e-9);
}

TEST(MinimaxPair, ResidualsOfPrintedEquations) {
  for (double rho : {0.1, 0.5}) {
    const auto m = double_integrator(rho);
    const auto w = unit_weights(3, 1);
    for (double tau : {1.0, 10.0, 100.0}) {
      const auto c = solve_design_pair(m, w, tau);
      if (c.Y.size() == 0 || c.X.size() == 0) continue;
      EXPECT_LE(c.residual_y, 1e-8 * (1.0 + c.Y.squaredNorm()));
      EXPECT_LE(c.residual_x, 1e-8 * (1.0 + c.X.squaredNorm()));
    }
  }
}

TEST(MinimaxPair, HugeUncertaintyGainIsInfeasible) {
  const auto m = double_integrator(50.0);
  const auto w = unit_weights(3, 1);
  bool any = false;
  for (double tau : {1e-3, 1e-1, 1.0, 1e1, 1e3}) any = any || solve_design_pair(m, w, tau).feasible();
  EXPECT_FALSE(any);
}

TEST(MinimaxCost, YZeroLeavesCrossTerm) {
  auto m = random_certain_model(4);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (Eigen::Index i = 0; i < m.D2.size(); ++i) m.D2(i) += 0.3 * g(rng);
  const auto w = unit_weights(4, 2);
  const MatrixXd X = MatrixXd::Identity(4, 4) * 0.7;
  const MatrixXd Y = MatrixXd::Zero(4, 4);
  const MatrixXd Gi = (m.D2 * m.D2.transpose()).inverse();
  const double expect = (m.B2 * m.D2.transpose() * Gi * m.D2 * m.B2.transpose() * X).trace();
  for (auto form : {WtauForm::kStandard, WtauForm::kPrinted}) {
    EXPECT_NEAR(cost_bound(m, w, 3.0, Y, X, form), expect, 1e-12 * (1 + std::abs(expect)));
  }
}

TEST(MinimaxCost, ScalarHandExpansion) {
  LinearizedDesignModel m;
  m.A = m.B1 = m.B2 = m.C1 = m.C2 = m.D1 = m.D2 = MatrixXd::Ones(1, 1);
  const MatrixXd half = MatrixXd::Constant(1, 1, 0.5);
  // R_t = 2, L = 1.5, L^2 X / (1 - 1/4) + Y R_t = 1.5 + 1
  for (auto form : {WtauForm::kStandard, WtauForm::kPrinted}) {
    EXPECT_NEAR(cost_bound(m, unit_weights(1, 1), 1.0, half, half, form), 2.5, 1e-15);
  }
}

TEST(MinimaxCost, LargeTauApproachesLqgCost) {
  const auto m = random_certain_model(5);
  const auto w = unit_weights(4, 2);
  const auto o = oracle_lqg(m, w);
  const auto c = solve_design_pair(m, w, 1e6);
  ASSERT_TRUE(c.feasible());
  EXPECT_NEAR(c.W, o.cost, 0.01 * o.cost);
}

TEST(MinimaxTau, DegenerateBracket) {
  const auto m = double_integrator(0.2);
  TauSearch s;
  s.tau_min = s.tau_max = 500.0;
  const auto r = optimize_tau(m, unit_weights(3, 1), s);
  EXPECT_EQ(r.best.tau, 500.0);
}

TEST(MinimaxTau, CertainModelPicksUpperEdge) {
  const auto m = double_integrator(0.0);
  const auto w = unit_weights(3, 1);
  TauSearch s;
  s.tau_min = 1e-1;
  s.tau_max = 1e3;
  const auto r = optimize_tau(m, w, s);
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 200; ++i) {
    const double tau = std::exp(std::log(1e-1) + (std::log(1e3) - std::log(1e-1)) * i / 199.0);
    const auto c = solve_design_pair(m, w, tau);
    if (!c.feasible()) {
      ASSERT_TRUE(std::isinf(prev)) << "feasible set is not an upper interval";
      continue;
    }
    EXPECT_LE(c.W, prev * (1 + 1e-12));
    prev = c.W;
  }
  EXPECT_EQ(r.best.tau, 1e3);
}

TEST(MinimaxTau, BeatsIndependentGrid) {
  for (double rho : {0.2, 0.5}) {
    const auto m = double_integrator(rho);
    const auto w = unit_weights(3, 1);
    TauSearch s;
    const auto r = optimize_tau(m, w, s);
    for (int i = 0; i < 50; ++i) {
      const double tau = std::exp(std::log(s.tau_min) + (std::log(s.tau_max) - std::log(s.tau_min)) * i / 49.0);
      const auto c = solve_design_pair(m, w, tau);
      if (c.feasible()) EXPECT_LE(r.best.W, c.W);
    }
  }
}

TEST(MinimaxTau, DeterministicAndThreadIndependent) {
  const auto m = double_integrator(0.3);
  const auto w = unit_weights(3, 1);
  TauSearch s;
  const int before = omp_get_max_threads();
  omp_set_num_threads(4);
  const auto a = optimize_tau(m, w, s);
  omp_set_num_threads(before);
  s.parallel = false;
  const auto b = optimize_tau(m, w, s);
  EXPECT_EQ(a.best.tau, b.best.tau);
  EXPECT_EQ(a.best.W, b.best.W);
  EXPECT_EQ(a.best.X, b.best.X);
}

TEST(MinimaxTau, NoFeasibleTauCarriesProbes) {
  const auto m = double_integrator(50.0);
  TauSearch s;
  s.grid = 10;
  try {
    optimize_tau(m, unit_weights(3, 1), s);
    FAIL();
  } catch (const NoFeasibleTau& e) {
    EXPECT_EQ(e.probes().size(), 10u);
  }
}

TEST(MinimaxController, LqgGainsAtLargeTau) {
  const auto m = random_certain_model(6);
  const auto w = unit_weights(4, 2);
  const auto o = oracle_lqg(m, w);
  const auto c = build_controller(m, w, solve_design_pair(m, w, 1e10));
  EXPECT_LT(rel(c.K, o.K), 1e-6);
  EXPECT_LT(rel(c.Bc, o.L), 1e-6);
  EXPECT_LT(rel(c.Ac, m.A + m.B1 * o.K - o.L * m.C2), 1e-6);
}

TEST(MinimaxController, CorrectionDecaysLikeInverseTau) {
  const auto m = random_certain_model(7);
  const auto w = unit_weights(4, 2);
  auto gap = [&](double tau) {
    const auto c = build_controller(m, w, solve_design_pair(m, w, tau));
    return (c.Ac - (m.A + m.B1 * c.K - c.Bc * m.C2)).norm();
  };
  const double g1 = gap(1e4), g2 = gap(1e5);
  EXPECT_NEAR(g1 / g2, 10.0, 0.5);
}

TEST(MinimaxController, ScalarDemoClosedLoopStable) {
  const auto m = scalar_demo(0.3);
  const auto w = unit_weights(1, 1);
  const auto c = build_controller(m, w, optimize_tau(m, w, {}).best);
  const Eigen::VectorXcd ev = closed_loop(m, c).A.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) EXPECT_LT(ev[i].real(), 0.0);
}

TEST(MinimaxController, RejectsInfeasibleCertificate) {
  const auto m = double_integrator(50.0);
  const auto w = unit_weights(3, 1);
  EXPECT_THROW(build_controller(m, w, solve_design_pair(m, w, 1.0)), Infeasible);
}

TEST(MinimaxVerify, CertificateHoldsForSyntheses) {
  for (const auto& m : {scalar_demo(0.3), double_integrator(0.2), double_integrator(0.5)}) {
    const auto w = unit_weights(static_cast<Eigen::Index>(m.n()), static_cast<Eigen::Index>(m.m()));
    const auto c = build_controller(m, w, optimize_tau(m, w, {}).best);
    const auto r = verify_design(m, w, c);
    EXPECT_TRUE(r.stable);
    EXPECT_LE(r.certificate_norm, 1.0 + 1e-6);
    EXPECT_TRUE(r.bound_holds);
    EXPECT_TRUE(r.robustly_stable);
  }
}

TEST(MinimaxVerify, CertainModelWithLqgController) {
  const auto m = random_certain_model(9);
  const auto w = unit_weights(4, 2);
  const auto c = build_controller(m, w, solve_design_pair(m, w, 1e8));
  const auto r = verify_design(m, w, c);
  EXPECT_TRUE(r.stable);
  EXPECT_TRUE(std::isfinite(r.psi_norm));
}

TEST(MinimaxVerify, ScalarExtremesStayStable) {
  const auto m = scalar_demo(0.4);
  const auto w = unit_weights(1, 1);
  const auto c = build_controller(m, w, optimize_tau(m, w, {}).best);
  const auto cl = closed_loop(m, c);
  MatrixXd Cz(1, 2);
  Cz << m.C1(0, 0), m.D1(0, 0) * c.K(0, 0);
  for (double d : {-1.0, 1.0}) {
    const MatrixXd Ap = cl.A + cl.B.leftCols(1) * d * Cz;
    EXPECT_LT(riccati::spectral_abscissa(Ap), 0.0);
  }
}

}  // namespace
}  // namespace robolin::minimax
