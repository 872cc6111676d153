#include <gtest/gtest.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "robolin/fileio.hpp"
#include "robolin/pipeline.hpp"
#include "robolin/sim.hpp"

namespace robolin::sim {
namespace {

using Eigen::VectorXd;
using plant::Box;

VectorXd vec(std::initializer_list<double> v) {
  VectorXd r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) r[i++] = x;
  return r;
}

TEST(SimRk4, Examples) {
  const Derivative zero = [](double, const VectorXd& x) { return VectorXd::Zero(x.size()); };
  EXPECT_EQ(rk4_step(zero, 0.0, vec({5.0}), 0.1)[0], 5.0);
  const Derivative decay = [](double, const VectorXd& x) { return VectorXd(-x); };
  EXPECT_NEAR(rk4_step(decay, 0.0, vec({1.0}), 0.1)[0], std::exp(-0.1), 1e-7);
  const Derivative drift = [](double, const VectorXd& x) { return VectorXd::Ones(x.size()); };
  EXPECT_EQ(rk4_step(drift, 0.0, vec({2.0}), 0.25)[0], 2.25);
}

TEST(SimRk4, FourthOrder) {
  const Derivative decay = [](double, const VectorXd& x) { return VectorXd(-x); };
  auto err = [&](double dt) {
    VectorXd x = vec({1.0});
    const int n = static_cast<int>(std::lround(1.0 / dt));
    for (int k = 0; k < n; ++k) x = rk4_step(decay, k * dt, x, dt);
    return std::abs(x[0] - std::exp(-1.0));
  };
  const double ratio = err(1e-2) / err(5e-3);
  EXPECT_GE(ratio, 14.0);
  EXPECT_LE(ratio, 18.0);
}

TEST(SimRk4, NonFiniteDerivative) {
  const Derivative bad = [](double, const VectorXd& x) {
    VectorXd d = VectorXd::Zero(x.size());
    d[1] = std::nan("");
    return d;
  };
  try {
    rk4_step(bad, 0.5, vec({1.0, 2.0}), 0.1);
    FAIL();
  } catch (const NonFiniteDerivative& e) {
    EXPECT_EQ(e.component(), 1u);
    EXPECT_EQ(e.t(), 0.5);
  }
}

TEST(SimSignals, ParameterAndReference) {
  ParameterSignal s;
  s.kind = ParameterSignal::Kind::kSinusoid;
  s.value = 2.0;
  s.amplitude = 0.2;
  s.frequency = 1.0;
  EXPECT_NEAR(s.at(M_PI / 2), 2.2, 1e-15);
  ParameterSignal pw;
  pw.kind = ParameterSignal::Kind::kPiecewise;
  pw.times = {0.0, 1.0};
  pw.values = {1.0, 3.0};
  EXPECT_EQ(pw.at(0.5), 2.0);
  EXPECT_EQ(pw.at(7.0), 3.0);

  ReferenceSchedule r;
  r.segments = {{ReferenceSegment::Kind::kStep, 1.0, 5.0, 0.0}, {ReferenceSegment::Kind::kRamp, 2.0, 6.0, 0.5}};
  EXPECT_EQ(r.at(0.5), 0.0);
  EXPECT_EQ(r.at(1.5), 5.0);
  EXPECT_EQ(r.at(3.0), 5.5);
  EXPECT_EQ(r.at(10.0), 6.0);
}

TEST(SimScenario, Validation) {
  Scenario s;
  ParameterSignal p;
  p.kind = ParameterSignal::Kind::kSinusoid;
  p.value = 1.0;
  p.amplitude = 0.2;
  p.frequency = 1.0;
  s.parameters = {p};
  s.t_final = 10.0;
  s.dt = 0.01;
  EXPECT_THROW(validate_scenario(s, Box({0.9}, {1.1})), Error);
  EXPECT_NO_THROW(validate_scenario(s, Box({0.8}, {1.2})));
  s.dt = 0.0;
  EXPECT_THROW(validate_scenario(s, Box({0.8}, {1.2})), Error);
  s.dt = 20.0;
  EXPECT_THROW(validate_scenario(s, Box({0.8}, {1.2})), Error);
}

pipeline::Options double_integrator_options() {
  pipeline::Options o;
  o.region = Box({-1, -1}, {1, 1});
  o.rho = 0.0;
  o.conventions.measured = {0, 1};
  o.weights = {Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(1, 1)};
  return o;
}

plant::UncertainPlant double_integrator() {
  return plant::parse_plant({{"x1", "x2"}, {"u"}, {}, {"x2", "0"}, {{"0"}, {"1"}}, {"x1"}, {}, Box{}});
}

TEST(SimLoop, DoubleIntegratorTracksStep) {
  const auto res = pipeline::run(double_integrator(), double_integrator_options());
  Scenario s;
  s.x0 = VectorXd::Zero(2);
  s.t_final = 40.0;
  s.dt = 0.01;
  s.references = {ReferenceSchedule{{{ReferenceSegment::Kind::kStep, 0.0, 1.0, 0.0}}}};
  const PlantTruth truth(double_integrator());
  const auto ts = simulate_closed_loop(s, truth, res.design);
  ASSERT_FALSE(ts.aborted) << ts.status;
  EXPECT_EQ(ts.rows(), 4001u);
  EXPECT_LE(std::abs(ts.y.back()[0] - 1.0), 1e-4);
  // linearizing law makes y'' = v along the run
  for (std::size_t k = 0; k < ts.rows(); k += 97) EXPECT_NEAR(ts.u[k][0], ts.v[k][0], 1e-12);
}

TEST(SimLoop, EquilibriumStaysAtZero) {
  const auto res = pipeline::run(double_integrator(), double_integrator_options());
  Scenario s;
  s.x0 = VectorXd::Zero(2);
  s.t_final = 2.0;
  s.dt = 0.01;
  const auto ts = simulate_closed_loop(s, PlantTruth(double_integrator()), res.design);
  for (std::size_t k = 0; k < ts.rows(); ++k) {
    EXPECT_TRUE(ts.x[k].isZero(0.0));
    EXPECT_TRUE(ts.chihat[k].isZero(0.0));
  }
  EXPECT_EQ(evaluate_cost(ts, double_integrator_options().weights), 0.0);
  const auto iqc = check_iqc(ts);
  EXPECT_EQ(iqc.lhs, 0.0);
  EXPECT_TRUE(iqc.holds);
}

TEST(SimCost, ConstantUnitState) {
  TimeSeries ts;
  for (int k = 0; k <= 200; ++k) {
    ts.t.push_back(k * 0.01);
    ts.chi.push_back(vec({1.0, 0.0}));
    ts.v.push_back(vec({0.0}));
  }
  const minimax::SynthesisWeights w{Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(1, 1)};
  EXPECT_NEAR(evaluate_cost(ts, w), 0.5, 1e-12);
}

// y' = p u + (p - 1) x with p0 = 1: the residual is exactly dp (x + v), so a
// constant p = 1 + rho realizes Delta = 1 in the design channel.
TEST(SimIqc, UnitDeltaGivesEquality) {
  const double rho = 0.3;
  const auto plant = plant::parse_plant({{"x1"}, {"u"}, {"p"}, {"(p - 1)*x1"}, {{"p"}}, {"x1"}, {1.0}, Box({0.5}, {1.5})});
  pipeline::Options o;
  o.region = Box({-1}, {1});
  o.integrators = false;
  o.rho = rho;
  o.conventions.measured = {0};
  o.weights = {Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)};
  const auto res = pipeline::run(plant, o);
  Scenario s;
  ParameterSignal p;
  p.value = 1.0 + rho;
  s.parameters = {p};
  s.x0 = vec({1.0});
  s.t_final = 5.0;
  s.dt = 0.01;
  const auto ts = simulate_closed_loop(s, PlantTruth(plant), res.design);
  ASSERT_FALSE(ts.aborted) << ts.status;
  const auto iqc = check_iqc(ts);
  EXPECT_GT(iqc.rhs, 1e-3);
  EXPECT_NEAR(iqc.lhs, iqc.rhs, 1e-9);
  EXPECT_TRUE(iqc.holds);
}

std::vector<std::vector<double>> parse_csv(const std::string& text, std::vector<std::string>& header) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) header.push_back(cell);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> r;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) {
      double v = 0;
      std::from_chars(cell.data(), cell.data() + cell.size(), v);
      r.push_back(v);
    }
    rows.push_back(r);
  }
  return rows;
}

TEST(SimCsv, SingleRowAndRoundTrip) {
  const auto res = pipeline::run(double_integrator(), double_integrator_options());
  Scenario s;
  s.x0 = vec({0.3, -0.1});
  s.t_final = 0.5;
  s.dt = 0.01;
  s.noise_intensity = 0.05;
  s.noise_seed = 4;
  const auto ts = simulate_closed_loop(s, PlantTruth(double_integrator()), res.design);
  ASSERT_EQ(ts.rows(), 51u);

  TimeSeries one = ts;
  for (auto* v : {&one.x, &one.chi, &one.chihat, &one.u, &one.v, &one.y, &one.ref}) v->resize(1);
  one.t.resize(1);
  one.zeta1_norm.resize(1);
  one.z_norm.resize(1);
  one.saturated.resize(1);
  const auto path = (std::filesystem::temp_directory_path() / "robolin_one.csv").string();
  export_csv(one, path);
  const std::string text = read_file(path);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  std::filesystem::remove(path);

  std::vector<std::string> header;
  const auto rows = parse_csv(to_csv(ts), header);
  EXPECT_EQ(header, ts.header());
  EXPECT_EQ(header.front(), "t");
  ASSERT_EQ(rows.size(), ts.rows());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = ts.row(k);
    ASSERT_EQ(rows[k].size(), r.size());
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(rows[k][i], r[i], 1e-12 * (1 + std::abs(r[i])));
  }
}

TEST(SimCsv, SeededRunsAreIdentical) {
  const auto res = pipeline::run(double_integrator(), double_integrator_options());
  Scenario s;
  s.x0 = vec({0.3, -0.1});
  s.t_final = 1.0;
  s.dt = 0.01;
  s.noise_intensity = 0.1;
  s.noise_seed = 77;
  const PlantTruth truth(double_integrator());
  EXPECT_EQ(to_csv(simulate_closed_loop(s, truth, res.design)), to_csv(simulate_closed_loop(s, truth, res.design)));
  Scenario other = s;
  other.noise_seed = 78;
  EXPECT_NE(to_csv(simulate_closed_loop(s, truth, res.design)), to_csv(simulate_closed_loop(other, truth, res.design)));
}

TEST(SimLoop, BlowUpGuardKeepsPartialLog) {
  const auto res = pipeline::run(double_integrator(), double_integrator_options());
  Scenario s;
  s.x0 = vec({10.0, 0.0});
  s.t_final = 5.0;
  s.dt = 0.01;
  s.blowup = 5.0;
  const auto ts = simulate_closed_loop(s, PlantTruth(double_integrator()), res.design);
  EXPECT_TRUE(ts.aborted);
  EXPECT_EQ(ts.rows(), 1u);
}

}  // namespace
}  // namespace robolin::sim
