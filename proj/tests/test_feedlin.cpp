#include <gtest/gtest.h>

#include <cmath>

#include "robolin/feedlin.hpp"

namespace robolin::feedlin {
namespace {

using expr::Expr;
using plant::Box;

plant::UncertainPlant oscillator_plant() {
  return plant::parse_plant({{"x1", "x2"}, {"u"}, {}, {"x2", "-x1"}, {{"0"}, {"1"}}, {"x1"}, {}, Box{}});
}

plant::UncertainPlant nonlinear3() {
  return plant::parse_plant({{"x1", "x2", "x3"}, {"u"}, {"p"},
                             {"x2", "x3 + 0.5*sin(x1)", "-x1*x2 + p*x3"},
                             {{"0"}, {"0"}, {"2 + cos(x1)"}}, {"x1"}, {0.3}, Box({0.2}, {0.4})});
}

TEST(FeedlinLie, GradientPicksField) {
  const auto p = oscillator_plant();
  const Expr x1 = p.outputs[0];
  const Expr l1 = lie_derivative(x1, p.f);
  EXPECT_EQ(expr::to_string(l1), "x2");
  const Expr l2 = lie_derivative(l1, p.f);
  EXPECT_EQ(expr::to_string(l2), "-x1");
}

TEST(FeedlinLie, ConservedQuantity) {
  const auto p = oscillator_plant();
  const Expr h = expr::parse("x1^2 + x2^2", p.space);
  const Expr l = lie_derivative(h, p.f);
  for (double a : {-1.0, 0.2, 3.0}) {
    for (double b : {-0.5, 2.0}) EXPECT_NEAR(expr::eval(l, std::vector<double>{a, b, 0.0}), 0.0, 1e-14);
  }
}

TEST(FeedlinDegree, DoubleIntegratorAndTripleChain) {
  const auto di = plant::decompose(plant::parse_plant({{"x1", "x2"}, {"u"}, {}, {"x2", "0"}, {{"0"}, {"1"}}, {"x1"}, {}, Box{}}));
  EXPECT_EQ(relative_degree(di, Box({-1, -1}, {1, 1}), 1).profile.r, std::vector<int>{2});
  const auto tri = plant::decompose(plant::parse_plant({{"x1", "x2", "x3"}, {"u"}, {}, {"x2", "x3", "0"}, {{"0"}, {"0"}, {"1"}}, {"x1"}, {}, Box{}}));
  EXPECT_EQ(relative_degree(tri, Box({-1, -1, -1}, {1, 1, 1}), 1).profile.r, std::vector<int>{3});
}

TEST(FeedlinDegree, SeedInvariant) {
  const auto d = plant::decompose(nonlinear3());
  const Box region({-1, -1, -1}, {1, 1, 1});
  EXPECT_EQ(relative_degree(d, region, 1).profile.r, relative_degree(d, region, 999).profile.r);
}

TEST(FeedlinDegree, UndeterminedWhenInputNeverAppears) {
  const auto d = plant::decompose(plant::parse_plant({{"x1", "x2"}, {"u"}, {}, {"0", "x1"}, {{"0"}, {"1"}}, {"x1"}, {}, Box{}}));
  EXPECT_THROW(relative_degree(d, Box({-1, -1}, {1, 1}), 1), DegreeUndetermined);
}

TEST(FeedlinControl, ScalarCase) {
  // f* = 2, g* = 4
  const auto p = plant::parse_plant({{"x1"}, {"u"}, {}, {"2"}, {{"4"}}, {"x1"}, {}, Box{}});
  const auto d = plant::decompose(p);
  const auto res = relative_degree(d, Box({-1}, {1}), 1);
  const Eigen::VectorXd u = linearizing_control(res.chain, p.space, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 6.0));
  EXPECT_DOUBLE_EQ(u[0], 1.0);
}

TEST(FeedlinControl, NullCase) {
  const auto p = plant::parse_plant({{"x1", "x2"}, {"u"}, {}, {"x2", "0"}, {{"0"}, {"1"}}, {"x1"}, {}, Box{}});
  const auto res = relative_degree(plant::decompose(p), Box({-1, -1}, {1, 1}), 1);
  const Eigen::VectorXd u = linearizing_control(res.chain, p.space, Eigen::Vector2d(0.3, -0.2), Eigen::VectorXd::Zero(1));
  EXPECT_EQ(u[0], 0.0);
}

TEST(FeedlinControl, SingularDecouplingReported) {
  const auto p = plant::parse_plant({{"x1"}, {"u"}, {}, {"0"}, {{"x1"}}, {"x1"}, {}, Box{}});
  const auto res = relative_degree(plant::decompose(p), Box({0.5}, {1}), 1);
  EXPECT_THROW(linearizing_control(res.chain, p.space, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)),
               SingularDecoupling);
}

TEST(FeedlinControl, DoubleIntegratorClosedLoopMatchesClosedForm) {
  const auto p = plant::parse_plant({{"x1", "x2"}, {"u"}, {}, {"x2", "0"}, {{"0"}, {"1"}}, {"x1"}, {}, Box{}});
  const auto res = relative_degree(plant::decompose(p), Box({-1, -1}, {1, 1}), 1);
  const LinearizingLaw law(res.chain, p.space);
  auto deriv = [&](const Eigen::Vector2d& x) {
    const Eigen::VectorXd v = Eigen::VectorXd::Constant(1, -x[0] - 2 * x[1]);
    const double u = law.control(x, v)[0];
    return Eigen::Vector2d(x[1], u);
  };
  Eigen::Vector2d x(1.0, 0.0);
  const double dt = 1e-3;
  double worst = 0.0;
  for (int k = 1; k <= 10000; ++k) {
    const Eigen::Vector2d k1 = deriv(x), k2 = deriv(x + 0.5 * dt * k1), k3 = deriv(x + 0.5 * dt * k2),
                          k4 = deriv(x + dt * k3);
    x += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    const double t = k * dt;
    // x1'' = -x1 - 2 x1', x1(0) = 1, x1'(0) = 0
    worst = std::max(worst, std::abs(x[0] - (1 + t) * std::exp(-t)));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(FeedlinChain, DerivativesAlongTrajectoryEqualCommands) {
  const auto p = nonlinear3();
  const auto d = plant::decompose(p);
  const auto res = relative_degree(d, Box({-1, -1, -1}, {1, 1, 1}), 4);
  ASSERT_EQ(res.profile.r, std::vector<int>{3});
  const LinearizingLaw law(res.chain, p.space);
  std::vector<Expr> grads;
  for (const auto& e : res.chain.lf[0]) {
    for (std::size_t j = 0; j < 3; ++j) grads.push_back(expr::diff(e, j));
  }
  std::vector<Expr> fields = d.f0;
  for (const auto& row : d.g0) fields.push_back(row[0]);
  const expr::Tape gt(grads), ft(fields);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  double v = 0.0;
  Eigen::Vector3d x(uni(rng), uni(rng), uni(rng));
  const double dt = 1e-3;
  for (int step = 0; step < 2000; ++step) {
    if (step % 200 == 0) v = uni(rng);
    const double u = law.control(x, Eigen::VectorXd::Constant(1, v))[0];
    const std::vector<double> vars{x[0], x[1], x[2], u, 0.3};
    const auto fg = ft.eval(vars);
    const Eigen::Vector3d xdot(fg[0] + fg[3] * u, fg[1] + fg[4] * u, fg[2] + fg[5] * u);
    const auto gr = gt.eval(vars);
    const double chain_vals[3] = {expr::eval(res.chain.lf[0][1], vars), expr::eval(res.chain.lf[0][2], vars), v};
    for (int j = 0; j < 3; ++j) {
      const double dj = gr[3 * j] * xdot[0] + gr[3 * j + 1] * xdot[1] + gr[3 * j + 2] * xdot[2];
      ASSERT_NEAR(dj, chain_vals[j], 1e-6 * (1 + std::abs(chain_vals[j])));
    }
    x += dt * xdot;
  }
}

TEST(FeedlinBrunovsky, SmallCases) {
  auto b = brunovsky_form({{1}}, false);
  EXPECT_EQ(b.A, Eigen::MatrixXd::Zero(1, 1));
  EXPECT_EQ(b.B, Eigen::MatrixXd::Ones(1, 1));
  b = brunovsky_form({{2}}, true);
  Eigen::MatrixXd A(3, 3);
  A << 0, 1, 0, 0, 0, 1, 0, 0, 0;
  EXPECT_EQ(b.A, A);
  EXPECT_EQ(b.B, Eigen::Vector3d(0, 0, 1));
}

TEST(FeedlinBrunovsky, PrintedNineStateModel) {
  const auto b = brunovsky_form({{3, 4}}, true);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(9, 9);
  for (int i : {0, 1, 2, 4, 5, 6, 7}) A(i, i + 1) = 1;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(9, 2);
  B(3, 0) = 1;
  B(8, 1) = 1;
  EXPECT_EQ(b.A, A);
  EXPECT_EQ(b.B, B);
}

TEST(FeedlinBrunovsky, NilpotentAndControllable) {
  for (const auto& r : std::vector<std::vector<int>>{{1}, {2, 3}, {3, 4}, {1, 1, 2}}) {
    for (bool integ : {false, true}) {
      const auto b = brunovsky_form({r}, integ);
      const auto n = b.A.rows();
      Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n);
      for (Eigen::Index k = 0; k < n; ++k) P = P * b.A;
      EXPECT_EQ(P.norm(), 0.0);
      Eigen::MatrixXd ctrb(n, n * b.B.cols());
      Eigen::MatrixXd Ak = b.B;
      for (Eigen::Index k = 0; k < n; ++k) {
        ctrb.middleCols(k * b.B.cols(), b.B.cols()) = Ak;
        Ak = b.A * Ak;
      }
      EXPECT_EQ(Eigen::FullPivLU<Eigen::MatrixXd>(ctrb).rank(), n);
    }
  }
}

TEST(FeedlinTransform, DoubleIntegrator) {
  const auto d = plant::decompose(plant::parse_plant({{"x1", "x2"}, {"u"}, {}, {"x2", "0"}, {{"0"}, {"1"}}, {"x1"}, {}, Box{}}));
  const auto T = build_transform(d, {{2}}, true);
  EXPECT_EQ(T.dim(), 3u);
  const Eigen::VectorXd chi = T.apply(Eigen::Vector2d(1.5, -0.5), Eigen::VectorXd(), Eigen::VectorXd::Constant(1, 0.5),
                                      Eigen::VectorXd::Constant(1, 0.25), true);
  EXPECT_EQ(chi, Eigen::Vector3d(0.25, 1.0, -0.5));
  const Eigen::VectorXd zero = T.apply(Eigen::Vector2d(2.0, 0.0), Eigen::VectorXd(), Eigen::VectorXd::Constant(1, 2.0),
                                       Eigen::VectorXd::Zero(1), true);
  EXPECT_EQ(zero.norm(), 0.0);
}

TEST(FeedlinTransform, RejectsDeficientDegree) {
  const auto d = plant::decompose(plant::parse_plant({{"x1", "x2"}, {"u"}, {}, {"-x1", "-x2"}, {{"1"}, {"1"}}, {"x1"}, {}, Box{}}));
  EXPECT_THROW(build_transform(d, {{1}}, true), NotFullRelativeDegree);
}

TEST(FeedlinTransform, NewtonInverse) {
  const auto p = nonlinear3();
  const auto d = plant::decompose(p);
  const auto T = build_transform(d, {{3}}, false);
  const Eigen::Vector3d x(0.4, -0.3, 0.2);
  const Eigen::VectorXd pv = Eigen::VectorXd::Constant(1, 0.35);
  const Eigen::VectorXd target = T.core(x, pv, false);
  const Eigen::VectorXd back = T.invert(target, pv, Eigen::VectorXd::Zero(3), false);
  EXPECT_LE((back - x).norm(), 1e-10);
}

}  // namespace
}  // namespace robolin::feedlin
