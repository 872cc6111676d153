#include "robolin/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "robolin/fileio.hpp"

namespace robolin::sim {

using Eigen::VectorXd;

NonFiniteDerivative::NonFiniteDerivative(double t, std::size_t component)
    : Error("non-finite derivative at t = " + format_double(t) + " in component " + std::to_string(component)),
      t_(t),
      component_(component) {}

namespace {

VectorXd checked(const Derivative& f, double t, const VectorXd& x) {
  VectorXd d = f(t, x);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) throw NonFiniteDerivative(t, static_cast<std::size_t>(i));
  }
  return d;
}

}  // namespace

VectorXd rk4_step(const Derivative& f, double t, const VectorXd& x, double dt) {
  const VectorXd k1 = checked(f, t, x);
  const VectorXd k2 = checked(f, t + 0.5 * dt, x + 0.5 * dt * k1);
  const VectorXd k3 = checked(f, t + 0.5 * dt, x + 0.5 * dt * k2);
  const VectorXd k4 = checked(f, t + dt, x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// ---------------------------------------------------------------------------

PlantTruth::PlantTruth(const plant::UncertainPlant& plant) : plant_(plant) {
  std::vector<expr::Expr> outs = plant.f;
  for (const auto& row : plant.g) outs.insert(outs.end(), row.begin(), row.end());
  tape_ = std::make_shared<const expr::Tape>(outs);
}

VectorXd PlantTruth::derivative(double, const VectorXd& x, const VectorXd& u, const VectorXd& p) const {
  const auto n = static_cast<Eigen::Index>(plant_.n()), m = static_cast<Eigen::Index>(plant_.m());
  const auto vars = plant_.bind({x.data(), static_cast<std::size_t>(x.size())}, {u.data(), static_cast<std::size_t>(u.size())},
                                {p.data(), static_cast<std::size_t>(p.size())});
  std::vector<double> out(tape_->output_count()), scratch;
  tape_->eval(vars, out, scratch);
  const VectorXd f = Eigen::Map<const VectorXd>(out.data(), n);
  const Eigen::MatrixXd g = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out.data() + n, n, m);
  return f + g * u;
}

// ---------------------------------------------------------------------------

double ParameterSignal::at(double t) const {
  switch (kind) {
    case Kind::kConstant:
      return value;
    case Kind::kSinusoid:
      return value + amplitude * std::sin(frequency * t + phase);
    case Kind::kPiecewise: {
      if (times.empty()) return value;
      if (t <= times.front()) return values.front();
      if (t >= times.back()) return values.back();
      const auto it = std::upper_bound(times.begin(), times.end(), t);
      const auto k = static_cast<std::size_t>(it - times.begin());
      const double s = (t - times[k - 1]) / (times[k] - times[k - 1]);
      return values[k - 1] + s * (values[k] - values[k - 1]);
    }
  }
  return value;
}

double ReferenceSchedule::at(double t) const {
  double r = 0.0;
  for (const auto& s : segments) {
    if (t < s.t0) break;
    switch (s.kind) {
      case ReferenceSegment::Kind::kStep:
        r = s.value;
        break;
      case ReferenceSegment::Kind::kRamp: {
        const double reach = std::abs(s.value - r);
        const double moved = std::min(reach, std::abs(s.rate) * (t - s.t0));
        r += s.value >= r ? moved : -moved;
        break;
      }
      case ReferenceSegment::Kind::kHold:
        break;
    }
  }
  return r;
}

void validate_scenario(const Scenario& s, const plant::Box& omega) {
  if (!(s.dt > 0.0) || !std::isfinite(s.dt)) throw Error("scenario dt must be positive");
  if (!(s.t_final >= s.dt) || !std::isfinite(s.t_final)) throw Error("scenario t_final must be at least dt");
  if (s.parameters.size() != omega.size()) {
    throw Error("scenario has " + std::to_string(s.parameters.size()) + " parameter signals, plant has " +
                std::to_string(omega.size()));
  }
  for (const auto& sig : s.parameters) {
    if (sig.kind == ParameterSignal::Kind::kPiecewise &&
        (sig.times.size() != sig.values.size() || sig.times.empty() || !std::is_sorted(sig.times.begin(), sig.times.end()))) {
      throw Error("piecewise parameter signal needs matching, sorted times and values");
    }
  }
  if (s.u_lower.size() != s.u_upper.size()) throw Error("input limits need matching lower and upper vectors");
  const auto steps = static_cast<std::size_t>(std::llround(s.t_final / s.dt));
  std::vector<double> p(omega.size());
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * s.dt;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = s.parameters[i].at(t);
    if (!omega.contains(p, 1e-12)) {
      throw Error("parameter path leaves Omega at t = " + format_double(t));
    }
  }
}

// ---------------------------------------------------------------------------

std::vector<std::string> TimeSeries::header() const {
  std::vector<std::string> h{"t"};
  for (const auto& n : x_names) h.push_back("x_" + n);
  for (const auto& n : chi_names) h.push_back(n);
  for (const auto& n : chi_names) h.push_back("hat_" + n);
  for (const auto& n : u_names) h.push_back("u_" + n);
  for (std::size_t i = 0; i < y_names.size(); ++i) h.push_back("v_" + std::to_string(i + 1));
  for (const auto& n : y_names) h.push_back("y_" + n);
  for (const auto& n : y_names) h.push_back("ref_" + n);
  h.push_back("zeta1_norm");
  h.push_back("z_norm");
  for (const auto& n : u_names) h.push_back("sat_" + n);
  return h;
}

std::vector<double> TimeSeries::row(std::size_t k) const {
  std::vector<double> r{t[k]};
  auto put = [&](const VectorXd& v) { r.insert(r.end(), v.data(), v.data() + v.size()); };
  put(x[k]);
  put(chi[k]);
  put(chihat[k]);
  put(u[k]);
  put(v[k]);
  put(y[k]);
  put(ref[k]);
  r.push_back(zeta1_norm[k]);
  r.push_back(z_norm[k]);
  for (auto s : saturated[k]) r.push_back(s);
  return r;
}

namespace {

struct Loop {
  const Scenario& sc;
  const TruthModel& truth;
  const Design& d;
  feedlin::LinearizingLaw law;
  meanval::TransformedResidualMap residual;
  std::shared_ptr<const expr::Tape> outputs;
  Eigen::MatrixXd E1inv;
  Eigen::Index nt, ni, nc, m, q;

  Loop(const Scenario& s, const TruthModel& tr, const Design& design)
      : sc(s),
        truth(tr),
        d(design),
        law(design.chain, design.plant.plant.space),
        residual(design.plant, design.chain, design.transform) {
    outputs = std::make_shared<const expr::Tape>(design.plant.plant.outputs);
    E1inv = design.model.E1.inverse();
    nt = s.x0.size();
    m = static_cast<Eigen::Index>(design.plant.plant.m());
    q = static_cast<Eigen::Index>(design.plant.plant.q());
    ni = design.transform.integrators() ? m : 0;
    nc = design.controller.Ac.rows();
  }

  VectorXd params(double t) const {
    VectorXd p(q);
    for (Eigen::Index i = 0; i < q; ++i) p[i] = sc.parameters[static_cast<std::size_t>(i)].at(t);
    return p;
  }

  VectorXd refs(double t) const {
    VectorXd r = VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < m && static_cast<std::size_t>(i) < sc.references.size(); ++i) {
      r[i] = sc.references[static_cast<std::size_t>(i)].at(t);
    }
    return r;
  }

  struct Point {
    VectorXd p, r, xd, chi, v, ud, uabs, y, ytil;
    std::vector<std::uint8_t> sat;
  };

  Point evaluate(double t, const VectorXd& X, const VectorXd& noise) const {
    Point P;
    const VectorXd x = X.head(nt), I = X.segment(nt, ni), xh = X.tail(nc);
    P.p = params(t);
    P.r = refs(t);
    P.xd = truth.design_state(x);
    VectorXd integrals = ni > 0 ? I : VectorXd::Zero(m);
    P.chi = d.transform.apply(P.xd, P.p, P.r, integrals, false);
    P.ytil = d.model.C2 * P.chi + noise;
    P.v = d.controller.K * xh;
    const VectorXd u = law.control(P.xd, P.v);
    const VectorXd off = truth.input_offset();
    P.uabs = off + u;
    P.sat.assign(static_cast<std::size_t>(m), 0);
    for (Eigen::Index i = 0; i < m && static_cast<std::size_t>(i) < sc.u_lower.size(); ++i) {
      const double lo = sc.u_lower[static_cast<std::size_t>(i)], hi = sc.u_upper[static_cast<std::size_t>(i)];
      if (P.uabs[i] < lo || P.uabs[i] > hi) {
        P.uabs[i] = std::clamp(P.uabs[i], lo, hi);
        P.sat[static_cast<std::size_t>(i)] = 1;
      }
    }
    P.ud = P.uabs - off;
    std::vector<double> vars(d.plant.plant.space.size(), 0.0), out(static_cast<std::size_t>(m)), scratch;
    for (Eigen::Index i = 0; i < P.xd.size(); ++i) vars[static_cast<std::size_t>(i)] = P.xd[i];
    outputs->eval(vars, out, scratch);
    P.y = Eigen::Map<const VectorXd>(out.data(), m);
    return P;
  }

  VectorXd derivative(double t, const VectorXd& X, const VectorXd& noise) const {
    const Point P = evaluate(t, X, noise);
    VectorXd dX(X.size());
    dX.head(nt) = truth.derivative(t, X.head(nt), P.uabs, P.p);
    if (ni > 0) dX.segment(nt, ni) = P.y - P.r;
    dX.tail(nc) = d.controller.Ac * X.tail(nc) + d.controller.Bc * P.ytil;
    return dX;
  }
};

}  // namespace

TimeSeries simulate_closed_loop(const Scenario& sc, const TruthModel& truth, const Design& design) {
  validate_scenario(sc, design.plant.plant.omega);
  if (sc.x0.size() != static_cast<Eigen::Index>(truth.state_names().size())) {
    throw Error("initial state has the wrong size for the truth model");
  }
  const Loop loop(sc, truth, design);
  const auto m = loop.m, nt = loop.nt, ni = loop.ni, nc = loop.nc;
  const auto p = design.model.C2.rows();

  TimeSeries ts;
  ts.x_names = truth.state_names();
  for (std::size_t i = 0; i < design.transform.dim(); ++i) ts.chi_names.push_back("chi" + std::to_string(i + 1));
  ts.u_names = design.plant.plant.space.input_names();
  for (Eigen::Index i = 0; i < m; ++i) ts.y_names.push_back(std::to_string(i + 1));

  VectorXd X = VectorXd::Zero(nt + ni + nc);
  X.head(nt) = sc.x0;

  std::mt19937_64 rng(sc.noise_seed);
  std::normal_distribution<double> gauss;
  const double scale = sc.noise_intensity / std::sqrt(sc.dt);
  auto draw = [&] {
    VectorXd n = VectorXd::Zero(p);
    if (sc.noise_intensity != 0.0) {
      for (Eigen::Index i = 0; i < p; ++i) n[i] = scale * gauss(rng);
    }
    return n;
  };

  const auto steps = static_cast<std::size_t>(std::llround(sc.t_final / sc.dt));
  auto log = [&](double t, const VectorXd& noise) {
    const auto P = loop.evaluate(t, X, noise);
    ts.t.push_back(t);
    ts.x.push_back(X.head(nt));
    ts.chi.push_back(P.chi);
    ts.chihat.push_back(X.tail(nc));
    ts.u.push_back(P.uabs);
    ts.v.push_back(P.v);
    ts.y.push_back(P.y);
    ts.ref.push_back(P.r);
    const VectorXd w = loop.residual.model_mismatch(P.xd, P.ud, P.p);
    ts.zeta1_norm.push_back((loop.E1inv * w).norm());
    ts.z_norm.push_back((design.model.C1 * P.chi + design.model.D1 * P.v).norm());
    ts.saturated.push_back(P.sat);
  };

  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * sc.dt;
    const VectorXd noise = draw();
    try {
      log(t, noise);
    } catch (const Error& e) {
      ts.aborted = true;
      ts.status = std::string("evaluation failed at t = ") + format_double(t) + ": " + e.what();
      break;
    }
    if (k == steps) break;
    try {
      X = rk4_step([&](double tt, const VectorXd& xx) { return loop.derivative(tt, xx, noise); }, t, X, sc.dt);
    } catch (const Error& e) {
      ts.aborted = true;
      ts.status = std::string("step failed at t = ") + format_double(t) + ": " + e.what();
      break;
    }
    if (!X.allFinite() || X.head(nt).cwiseAbs().maxCoeff() > sc.blowup) {
      ts.aborted = true;
      ts.status = "state exceeded the blow-up bound after t = " + format_double(t);
      break;
    }
  }
  return ts;
}

double evaluate_cost(const TimeSeries& ts, const minimax::SynthesisWeights& w) {
  if (ts.rows() < 2) return 0.0;
  const std::size_t N = ts.rows() - 1;
  const double dt = ts.dt();
  double sum = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    sum += dt * (ts.chi[k].dot(w.R * ts.chi[k]) + ts.v[k].dot(w.G * ts.v[k]));
  }
  const double T = dt * static_cast<double>(N);
  return sum / (2.0 * T);
}

IqcReport check_iqc(const TimeSeries& ts, double tolerance) {
  IqcReport r;
  if (ts.rows() >= 2) {
    const double dt = ts.dt();
    for (std::size_t k = 0; k + 1 < ts.rows(); ++k) {
      r.lhs += dt * ts.zeta1_norm[k] * ts.zeta1_norm[k];
      r.rhs += dt * ts.z_norm[k] * ts.z_norm[k];
    }
  }
  r.margin = r.rhs - r.lhs;
  r.holds = r.lhs <= r.rhs + tolerance * (1.0 + r.rhs);
  return r;
}

std::string to_csv(const TimeSeries& ts) {
  std::string s;
  const auto h = ts.header();
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (i) s += ',';
    s += h[i];
  }
  s += '\n';
  for (std::size_t k = 0; k < ts.rows(); ++k) {
    const auto r = ts.row(k);
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) s += ',';
      s += format_double(r[i]);
    }
    s += '\n';
  }
  return s;
}

void export_csv(const TimeSeries& ts, const std::string& path) { write_file_atomic(path, to_csv(ts)); }

}  // namespace robolin::sim
