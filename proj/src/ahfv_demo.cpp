#include "robolin/ahfv_demo.hpp"

#include <cmath>

#include "robolin/riccati.hpp"

namespace robolin::ahfv {

using Eigen::MatrixXd;
using Eigen::VectorXd;

DemoConfig default_demo_config(AhfvCoefficients c) {
  DemoConfig d;
  d.coefficients = std::move(c);
  for (std::size_t i = 0; i < kParamCount; ++i) {
    d.frequency.push_back(0.02 + 0.01 * static_cast<double>(i));
    d.phase.push_back(0.7 * static_cast<double>(i));
  }
  auto& o = d.design;
  o.region = plant::Box({-50, -500, -0.01, -0.01, -0.05, -0.1, -0.02}, {50, 500, 0.01, 0.01, 0.05, 0.1, 0.02});
  o.integrators = true;
  o.conventions.measured = {0, 1, 2, 4, 5, 6};
  o.conventions.sensor_scale.assign(6, 100.0);
  o.conventions.E1 = 0.1 * MatrixXd::Identity(2, 2);
  o.weights.R = MatrixXd::Identity(9, 9);
  o.weights.G = MatrixXd::Identity(2, 2);
  o.plan.random = 4096;
  o.plan.refine_starts = 8;
  return d;
}

namespace {

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

PilotEnvelope pilot_box(const pipeline::Linearization& lin, const DemoConfig& cfg) {
  const auto& up = lin.plant.plant;
  const auto& bm = lin.brunovsky;
  const auto nchi = bm.A.rows();
  const riccati::CareProblem cp{bm.A, bm.B * bm.B.transpose(), cfg.pilot_weight * MatrixXd::Identity(nchi, nchi)};
  const MatrixXd K = -bm.B.transpose() * riccati::solve_care(cp).X;
  const feedlin::LinearizingLaw law(lin.degrees.chain, up.space);
  const sim::PlantTruth truth(up);
  const auto n = static_cast<Eigen::Index>(up.n());
  const auto m = static_cast<Eigen::Index>(up.m());
  const VectorXd p0 = Eigen::Map<const VectorXd>(up.p0.data(), static_cast<Eigen::Index>(up.p0.size()));
  const VectorXd cmd = Eigen::Map<const VectorXd>(cfg.command.data(), 2);

  PilotEnvelope env;
  env.chi_peak = VectorXd::Zero(nchi);
  env.v_peak = VectorXd::Zero(m);
  const std::vector<VectorXd> cases = {p0, Eigen::Map<const VectorXd>(up.omega.lower.data(), p0.size()),
                                       Eigen::Map<const VectorXd>(up.omega.upper.data(), p0.size())};
  const auto steps = static_cast<int>(std::llround(cfg.pilot_horizon / cfg.pilot_dt));
  for (const VectorXd& p : cases) {
    VectorXd z = VectorXd::Zero(n + m);  // state, integrals
    auto f = [&](double t, const VectorXd& s) {
      const VectorXd x = s.head(n);
      const VectorXd chi = lin.transform.apply(x, p0, cmd, s.tail(m), true);
      const VectorXd u = law.control(x, K * chi);
      VectorXd d(n + m);
      d.head(n) = truth.derivative(t, x, u, p);
      for (Eigen::Index i = 0; i < m; ++i) {
        d(n + i) = expr::eval(up.outputs[static_cast<std::size_t>(i)], up.bind(to_std(x), std::vector<double>(static_cast<std::size_t>(m), 0.0), to_std(p))) - cmd(i);
      }
      return d;
    };
    for (int k = 0; k <= steps; ++k) {
      const VectorXd x = z.head(n);
      const VectorXd chi = lin.transform.apply(x, p, cmd, z.tail(m), false);
      const VectorXd v = K * lin.transform.apply(x, p0, cmd, z.tail(m), true);
      env.chi_peak = env.chi_peak.cwiseMax(chi.cwiseAbs());
      env.v_peak = env.v_peak.cwiseMax(v.cwiseAbs());
      if (k < steps) z = sim::rk4_step(f, k * cfg.pilot_dt, z, cfg.pilot_dt);
    }
  }
  std::vector<double> lo(static_cast<std::size_t>(nchi)), hi(lo.size());
  for (Eigen::Index i = 0; i < nchi; ++i) {
    hi[static_cast<std::size_t>(i)] = cfg.inflation * env.chi_peak(i) + cfg.chi_floor;
    lo[static_cast<std::size_t>(i)] = -hi[static_cast<std::size_t>(i)];
  }
  env.box.chi = plant::Box(lo, hi);
  lo.assign(static_cast<std::size_t>(m), 0.0);
  hi.assign(static_cast<std::size_t>(m), 0.0);
  for (Eigen::Index i = 0; i < m; ++i) {
    hi[static_cast<std::size_t>(i)] = cfg.inflation * env.v_peak(i) + cfg.v_floor;
    lo[static_cast<std::size_t>(i)] = -hi[static_cast<std::size_t>(i)];
  }
  env.box.v = plant::Box(lo, hi);
  return env;
}

sim::Scenario demo_scenario(const DemoConfig& cfg, const plant::UncertainPlant& plant, const Trim& truth) {
  if (cfg.frequency.size() != plant.q() || cfg.phase.size() != plant.q()) {
    throw Error("demo needs one frequency and one phase per parameter");
  }
  sim::Scenario s;
  for (std::size_t i = 0; i < plant.q(); ++i) {
    sim::ParameterSignal sig;
    sig.kind = sim::ParameterSignal::Kind::kSinusoid;
    sig.value = plant.p0[i];
    sig.amplitude = cfg.variation * std::abs(plant.p0[i]);
    sig.frequency = cfg.frequency[i];
    sig.phase = cfg.phase[i];
    s.parameters.push_back(sig);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    sim::ReferenceSchedule r;
    r.segments.push_back({sim::ReferenceSegment::Kind::kStep, cfg.t_command, cfg.command[i], 0.0});
    s.references.push_back(r);
  }
  s.x0 = truth.truth_state();
  s.t_final = cfg.t_final;
  s.dt = cfg.dt;
  s.noise_seed = cfg.noise_seed;
  s.noise_intensity = cfg.noise_intensity;
  s.u_lower = {cfg.de_limits[0], cfg.phic_limits[0]};
  s.u_upper = {cfg.de_limits[1], cfg.phic_limits[1]};
  return s;
}

DemoMetrics score_demo(const sim::TimeSeries& ts, const DemoConfig& cfg, const minimax::SynthesisWeights& w,
                       double W) {
  DemoMetrics m;
  m.bounded = !ts.aborted && ts.rows() > 0 && std::abs(ts.t.back() - cfg.t_final) < 0.5 * cfg.dt;
  for (const auto& x : ts.x) m.bounded = m.bounded && x.allFinite();
  const double t0 = cfg.t_final * (1.0 - cfg.settle_fraction);
  for (std::size_t i = 0; i < 2; ++i) {
    m.tolerance[i] = cfg.tracking_tolerance * std::abs(cfg.command[i]);
    for (std::size_t k = 0; k < ts.rows(); ++k) {
      if (ts.t[k] < t0) continue;
      const auto ii = static_cast<Eigen::Index>(i);
      m.max_error[i] = std::max(m.max_error[i], std::abs(ts.y[k](ii) - ts.ref[k](ii)));
    }
  }
  m.tracking = m.bounded && m.max_error[0] <= m.tolerance[0] && m.max_error[1] <= m.tolerance[1];
  m.iqc = sim::check_iqc(ts);
  m.J = sim::evaluate_cost(ts, w);
  m.W = W;
  m.cost = std::isfinite(W) && m.J <= cfg.cost_margin * W;
  return m;
}

DemoDesign design_demo(const DemoConfig& cfg) {
  DemoDesign d;
  d.plant = simplified_design_plant(cfg.coefficients, cfg.output_units);
  const auto report = plant::validate(d.plant.plant, cfg.validate_samples, cfg.design.seed);
  if (!report.passed()) {
    for (const auto& c : report.checks)
      if (!c.passed) throw Error("AHFV design plant fails validation: " + c.name + " (" + c.detail + ")");
  }
  d.truth_trim = truth_trim(cfg.coefficients, d.plant.trim);
  d.lin = pipeline::linearize(d.plant.plant, cfg.design);
  d.envelope = pilot_box(d.lin, cfg);
  pipeline::Options o = cfg.design;
  o.box = d.envelope.box;
  d.result = pipeline::run(d.lin, o);
  return d;
}

DemoRun run_demo(const DemoConfig& cfg) {
  DemoRun r;
  r.design = design_demo(cfg);
  const AhfvTruth truth(cfg.coefficients, r.design.plant.trim);
  r.scenario = demo_scenario(cfg, r.design.plant.plant, r.design.truth_trim);
  r.series = sim::simulate_closed_loop(r.scenario, truth, r.design.result.design);
  r.metrics = score_demo(r.series, cfg, cfg.design.weights, r.design.result.tau.best.W);
  return r;
}

}  // namespace robolin::ahfv
