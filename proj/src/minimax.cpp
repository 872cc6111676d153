#include "robolin/minimax.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "robolin/riccati.hpp"

namespace robolin::minimax {

using Eigen::MatrixXd;

WtauForm parse_wtau_form(const std::string& name) {
  if (name == "standard") return WtauForm::kStandard;
  if (name == "printed") return WtauForm::kPrinted;
  throw Error("unknown wtau_form '" + name + "' (expected standard or printed)");
}

std::string to_string(WtauForm form) { return form == WtauForm::kStandard ? "standard" : "printed"; }

MatrixXd psd_sqrt(const MatrixXd& S) {
  const Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()));
  const Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

void check_dims(const LinearizedDesignModel& m, const SynthesisWeights& w) {
  const auto n = m.A.rows(), k = m.B1.cols();
  if (w.R.rows() != n || w.R.cols() != n) throw Error("R must be " + std::to_string(n) + " x " + std::to_string(n));
  if (w.G.rows() != k || w.G.cols() != k) throw Error("G must be " + std::to_string(k) + " x " + std::to_string(k));
}

MatrixXd sym(const MatrixXd& X) { return 0.5 * (X + X.transpose()); }

double min_eig(const MatrixXd& S) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(sym(S), Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

struct Canonical {
  riccati::CareProblem y, x;
};

Canonical canonical(const LinearizedDesignModel& m, const DesignTerms& t, double tau) {
  const MatrixXd Gi = t.Gamma.inverse();
  const MatrixXd Gti = t.G_tau.inverse();
  const auto nw = m.B2.cols();
  Canonical c;
  const MatrixXd Ay = m.A - m.B2 * m.D2.transpose() * Gi * m.C2;
  c.y.A = Ay.transpose();
  c.y.M = sym(m.C2.transpose() * Gi * m.C2 - t.R_tau / tau);
  c.y.Q = sym(m.B2 * (MatrixXd::Identity(nw, nw) - m.D2.transpose() * Gi * m.D2) * m.B2.transpose());
  c.x.A = m.A - m.B1 * Gti * t.Upsilon.transpose();
  c.x.M = sym(m.B1 * Gti * m.B1.transpose() - m.B2 * m.B2.transpose() / tau);
  c.x.Q = sym(t.R_tau - t.Upsilon * Gti * t.Upsilon.transpose());
  return c;
}

}  // namespace

DesignTerms design_terms(const LinearizedDesignModel& m, const SynthesisWeights& w, double tau) {
  check_dims(m, w);
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error("tau must be positive and finite");
  DesignTerms t;
  t.R_tau = w.R + tau * m.C1.transpose() * m.C1;
  t.G_tau = w.G + tau * m.D1.transpose() * m.D1;
  t.Upsilon = tau * m.C1.transpose() * m.D1;
  t.Gamma = m.D2 * m.D2.transpose();
  if (!Eigen::FullPivLU<MatrixXd>(t.Gamma).isInvertible()) throw Error("D2 D2' is singular");
  return t;
}

double y_equation_residual(const LinearizedDesignModel& m, const SynthesisWeights& w, double tau, const MatrixXd& Y) {
  const auto t = design_terms(m, w, tau);
  const MatrixXd Gi = t.Gamma.inverse();
  const auto nw = m.B2.cols();
  const MatrixXd Ay = m.A - m.B2 * m.D2.transpose() * Gi * m.C2;
  const MatrixXd r = Ay * Y + Y * Ay.transpose() - Y * (m.C2.transpose() * Gi * m.C2 - t.R_tau / tau) * Y +
                     m.B2 * (MatrixXd::Identity(nw, nw) - m.D2.transpose() * Gi * m.D2) * m.B2.transpose();
  return r.norm();
}

double x_equation_residual(const LinearizedDesignModel& m, const SynthesisWeights& w, double tau, const MatrixXd& X) {
  const auto t = design_terms(m, w, tau);
  const MatrixXd Gti = t.G_tau.inverse();
  const MatrixXd Ax = m.A - m.B1 * Gti * t.Upsilon.transpose();
  const MatrixXd r = X * Ax + Ax.transpose() * X - X * (m.B1 * Gti * m.B1.transpose() - m.B2 * m.B2.transpose() / tau) * X +
                     (t.R_tau - t.Upsilon * Gti * t.Upsilon.transpose());
  return r.norm();
}

double cost_bound(const LinearizedDesignModel& m, const SynthesisWeights& w, double tau, const MatrixXd& Y,
                  const MatrixXd& X, WtauForm form) {
  const auto t = design_terms(m, w, tau);
  const auto n = m.A.rows();
  const MatrixXd Gi = t.Gamma.inverse();
  const MatrixXd I = MatrixXd::Identity(n, n);
  const double s = form == WtauForm::kStandard ? 1.0 : tau;
  const MatrixXd coupling = form == WtauForm::kStandard ? MatrixXd(I - Y * X / tau) : MatrixXd(I - Y * X);
  const Eigen::FullPivLU<MatrixXd> lu(coupling);
  if (!lu.isInvertible()) throw Infeasible("coupling matrix is singular");
  const MatrixXd L = s * Y * m.C2.transpose() + m.B2 * m.D2.transpose();
  const MatrixXd T = L * Gi * L.transpose() * X * lu.inverse() + s * Y * t.R_tau;
  return T.trace();
}

TauCertificate solve_design_pair(const LinearizedDesignModel& m, const SynthesisWeights& w, double tau, WtauForm form) {
  TauCertificate c;
  c.tau = tau;
  DesignTerms t;
  try {
    t = design_terms(m, w, tau);
  } catch (const Error& e) {
    c.reason = e.what();
    return c;
  }
  const Canonical can = canonical(m, t, tau);
  try {
    c.Y = riccati::solve_care(can.y).X;
  } catch (const Error& e) {
    c.reason = std::string("Y equation: ") + e.what();
    return c;
  }
  try {
    c.X = riccati::solve_care(can.x).X;
  } catch (const Error& e) {
    c.reason = std::string("X equation: ") + e.what();
    return c;
  }
  c.residual_y = y_equation_residual(m, w, tau, c.Y);
  c.residual_x = x_equation_residual(m, w, tau, c.X);

  const double ytol = 1e-9 * std::max(1.0, c.Y.norm()), xtol = 1e-9 * std::max(1.0, c.X.norm());
  c.Y_pd = min_eig(c.Y) > ytol;
  c.X_pd = min_eig(c.X) > xtol;
  // I - YX/tau > 0 in the sense of rho(YX) < tau; YX is similar to Y^1/2 X Y^1/2.
  if (c.Y_pd && c.X_pd) {
    const MatrixXd Ys = psd_sqrt(c.Y);
    const double rho = Eigen::SelfAdjointEigenSolver<MatrixXd>(sym(Ys * c.X * Ys), Eigen::EigenvaluesOnly)
                           .eigenvalues()
                           .maxCoeff();
    c.coupling_pd = rho < tau * (1.0 - 1e-12);
  }
  const double wtol = 1e-9 * std::max(1.0, can.x.Q.norm());
  c.weight_psd = min_eig(can.x.Q) >= -wtol;

  if (!c.Y_pd) c.reason = "Y is not positive definite";
  else if (!c.X_pd) c.reason = "X is not positive definite";
  else if (!c.coupling_pd) c.reason = "I - Y X / tau is not positive definite";
  else if (!c.weight_psd) c.reason = "R_tau - Upsilon G_tau^-1 Upsilon' is not PSD";
  if (!c.reason.empty()) return c;
  try {
    c.W = cost_bound(m, w, tau, c.Y, c.X, form);
  } catch (const Infeasible& e) {
    c.reason = e.what();
  }
  if (c.reason.empty() && !std::isfinite(c.W)) c.reason = "cost bound is not finite";
  return c;
}

// ---------------------------------------------------------------------------

namespace {

double score(const TauCertificate& c) { return c.feasible() ? c.W : std::numeric_limits<double>::infinity(); }

// (W, tau) lexicographic
bool better(const TauCertificate& a, const TauCertificate& b) {
  const double sa = score(a), sb = score(b);
  if (sa != sb) return sa < sb;
  return a.tau < b.tau;
}

}  // namespace

TauSearchResult optimize_tau(const LinearizedDesignModel& m, const SynthesisWeights& w, const TauSearch& s) {
  if (!(s.tau_min > 0.0) || !(s.tau_max >= s.tau_min) || !std::isfinite(s.tau_max)) {
    throw Error("tau bracket must satisfy 0 < tau_min <= tau_max < inf");
  }
  const std::size_t N = s.tau_min == s.tau_max ? 1 : std::max<std::size_t>(s.grid, 2);
  const double l0 = std::log(s.tau_min), l1 = std::log(s.tau_max);
  auto tau_at = [&](std::size_t i) {
    if (i == 0) return s.tau_min;
    if (i + 1 == N) return s.tau_max;
    return std::exp(l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(N - 1));
  };
  std::vector<TauCertificate> grid(N);
#pragma omp parallel for schedule(dynamic, 1) if (s.parallel)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(N); ++i) {
    grid[static_cast<std::size_t>(i)] = solve_design_pair(m, w, tau_at(static_cast<std::size_t>(i)), s.form);
  }

  TauSearchResult r;
  std::size_t best = 0;
  for (std::size_t i = 0; i < N; ++i) {
    r.probes.push_back({grid[i].tau, score(grid[i]), grid[i].reason});
    if (better(grid[i], grid[best])) best = i;
  }
  if (!grid[best].feasible()) {
    std::ostringstream os;
    os << "no feasible tau in [" << s.tau_min << ", " << s.tau_max << "] over " << N << " probes";
    throw NoFeasibleTau(os.str(), r.probes);
  }
  r.best = grid[best];
  if (N < 3) return r;

  // golden section on log tau over the neighbours of the best probe
  double a = std::log(tau_at(best == 0 ? 0 : best - 1));
  double b = std::log(tau_at(std::min(best + 1, N - 1)));
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  auto probe = [&](double lt) {
    TauCertificate c = solve_design_pair(m, w, std::exp(lt), s.form);
    r.probes.push_back({c.tau, score(c), c.reason});
    if (better(c, r.best)) r.best = c;
    return score(c);
  };
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = probe(x1), f2 = probe(x2);
  for (std::size_t it = 0; it < s.golden_iters && b - a > 1e-12 * (1.0 + std::abs(a)); ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = probe(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = probe(x2);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

Controller build_controller(const LinearizedDesignModel& m, const SynthesisWeights& w, const TauCertificate& cert) {
  if (!cert.feasible()) throw Infeasible("certificate at tau = " + std::to_string(cert.tau) + " is infeasible: " + cert.reason);
  const double tau = cert.tau;
  const auto t = design_terms(m, w, tau);
  const auto n = m.A.rows();
  const MatrixXd& X = cert.X;
  const MatrixXd& Y = cert.Y;
  Controller c;
  c.certificate = cert;
  c.K = -t.G_tau.ldlt().solve(m.B1.transpose() * X + t.Upsilon.transpose());
  const MatrixXd coupling = MatrixXd::Identity(n, n) - Y * X / tau;
  c.Bc = coupling.partialPivLu().solve(Y * m.C2.transpose() + m.B2 * m.D2.transpose()) * t.Gamma.inverse();
  c.Ac = m.A + m.B1 * c.K - c.Bc * m.C2 + (m.B2 - c.Bc * m.D2) * m.B2.transpose() * X / tau;

  const ClosedLoop cl = closed_loop(m, c);
  const double a = riccati::spectral_abscissa(cl.A);
  if (!(a < 0.0)) {
    std::ostringstream os;
    os << "closed loop is not Hurwitz (spectral abscissa " << a << "); eigenvalues:";
    const Eigen::VectorXcd ev = cl.A.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) os << ' ' << ev[i].real() << (ev[i].imag() >= 0 ? "+" : "") << ev[i].imag() << 'i';
    throw SynthesisInconsistency(os.str());
  }
  return c;
}

ClosedLoop closed_loop(const LinearizedDesignModel& m, const Controller& c) {
  const auto n = m.A.rows(), nc = c.Ac.rows(), nw = m.B2.cols();
  ClosedLoop cl;
  cl.A = MatrixXd::Zero(n + nc, n + nc);
  cl.A.topLeftCorner(n, n) = m.A;
  cl.A.topRightCorner(n, nc) = m.B1 * c.K;
  cl.A.bottomLeftCorner(nc, n) = c.Bc * m.C2;
  cl.A.bottomRightCorner(nc, nc) = c.Ac;
  cl.B = MatrixXd::Zero(n + nc, nw);
  cl.B.topRows(n) = m.B2;
  cl.B.bottomRows(nc) = c.Bc * m.D2;
  return cl;
}

VerificationReport verify_design(const LinearizedDesignModel& m, const SynthesisWeights& w, const Controller& c,
                                 const VerifyOptions& opt) {
  VerificationReport r;
  const ClosedLoop cl = closed_loop(m, c);
  const auto n = m.A.rows(), nc = c.Ac.rows(), k = m.B1.cols(), nw = m.B2.cols();
  r.abscissa = riccati::spectral_abscissa(cl.A);
  r.stable = r.abscissa < 0.0;

  // Psi = [R^1/2 chi; G^1/2 v], z = C1 chi + D1 v, v = K chi_hat
  MatrixXd Cpsi = MatrixXd::Zero(n + k, n + nc);
  Cpsi.topLeftCorner(n, n) = psd_sqrt(w.R);
  Cpsi.bottomRightCorner(k, nc) = psd_sqrt(w.G) * c.K;
  MatrixXd Cz(m.C1.rows(), n + nc);
  Cz.leftCols(n) = m.C1;
  Cz.rightCols(nc) = m.D1 * c.K;

  if (r.stable) {
    const double tau = c.certificate.tau;
    MatrixXd Cs(Cpsi.rows() + Cz.rows(), n + nc);
    Cs.topRows(Cpsi.rows()) = Cpsi / std::sqrt(tau);
    Cs.bottomRows(Cz.rows()) = Cz;
    r.certificate_norm = riccati::hinf_norm(cl.A, cl.B, Cs, MatrixXd::Zero(Cs.rows(), nw), 1e-9);
    r.psi_norm = riccati::hinf_norm(cl.A, cl.B, Cpsi, MatrixXd::Zero(Cpsi.rows(), nw), 1e-9);
    r.bound_holds = r.certificate_norm <= 1.0 + 1e-6;
  } else {
    r.certificate_norm = r.psi_norm = std::numeric_limits<double>::infinity();
  }

  // constant Delta with ||Delta|| <= 1 closing zeta1 = Delta z through the first m columns of B2
  const auto mz = m.C1.rows();
  const MatrixXd Bz = cl.B.leftCols(mz);
  std::vector<MatrixXd> deltas = {MatrixXd::Identity(mz, mz), -MatrixXd::Identity(mz, mz)};
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (deltas.size() < std::max<std::size_t>(opt.delta_samples, 2)) {
    MatrixXd d(mz, mz);
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = g(rng);
    const double s = meanval::spectral_norm(d);
    deltas.push_back(s > 0 ? MatrixXd(d * (std::sqrt(u(rng)) / s)) : d);
  }
  r.delta_samples = deltas.size();
  r.worst_perturbed_abscissa = -std::numeric_limits<double>::infinity();
  for (const auto& d : deltas) {
    r.worst_perturbed_abscissa = std::max(r.worst_perturbed_abscissa, riccati::spectral_abscissa(cl.A + Bz * d * Cz));
  }
  r.robustly_stable = r.worst_perturbed_abscissa < 0.0;
  return r;
}

}  // namespace robolin::minimax
