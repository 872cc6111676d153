#include "robolin/ahfv.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace robolin::ahfv {

using Eigen::VectorXd;
using expr::Expr;

namespace {

struct Field {
  const char* name;
  double AhfvCoefficients::*member;
};

const std::vector<Field>& scalar_fields() {
  using C = AhfvCoefficients;
  static const std::vector<Field> fields = {
      {"CL_alpha", &C::CL_alpha}, {"CL_de", &C::CL_de}, {"CL_dc", &C::CL_dc},
      {"CL_dtau1", &C::CL_t1}, {"CL_dtau2", &C::CL_t2}, {"CL_0", &C::CL_0},
      {"CM_alpha", &C::CM_alpha}, {"CM_de", &C::CM_de}, {"CM_dc", &C::CM_dc},
      {"CM_dtau1", &C::CM_t1}, {"CM_dtau2", &C::CM_t2}, {"CM_0", &C::CM_0},
      {"CD_alpha2", &C::CD_a2}, {"CD_alpha", &C::CD_a}, {"CD_de2", &C::CD_de2}, {"CD_de", &C::CD_de},
      {"CD_dc2", &C::CD_dc2}, {"CD_dc", &C::CD_dc}, {"CD_alpha_de", &C::CD_ade},
      {"CD_alpha_dc", &C::CD_adc}, {"CD_dtau1", &C::CD_t1}, {"CD_0", &C::CD_0},
      {"CTphi_alpha", &C::CTphi_alpha}, {"CTphi_alpha_Minv2", &C::CTphi_aM2},
      {"CTphi_alpha_dtau1", &C::CTphi_at1}, {"CTphi_Minv2", &C::CTphi_M2},
      {"CTphi_dtau1_2", &C::CTphi_t1sq}, {"CTphi_dtau1", &C::CTphi_t1}, {"CTphi_0", &C::CTphi_0},
      {"CT_Ad", &C::CT_Ad}, {"CT_alpha", &C::CT_alpha}, {"CT_Minv2", &C::CT_M2},
      {"CT_dtau1", &C::CT_t1}, {"CT_0", &C::CT_0},
      {"mass", &C::mass}, {"Iyy", &C::Iyy}, {"S", &C::S}, {"cbar", &C::cbar}, {"zT", &C::zT}, {"g", &C::g},
      {"rho0", &C::rho0}, {"h0", &C::h0}, {"hs", &C::hs}, {"h_min", &C::h_min}, {"h_max", &C::h_max},
      {"M0", &C::M0},
      {"zeta_m", &C::zeta_m}, {"zeta", &C::zeta}, {"omega_n", &C::omega_n},
      {"interconnect", &C::interconnect}, {"Ad", &C::Ad},
      {"V_trim", &C::V_trim}, {"h_trim", &C::h_trim},
  };
  return fields;
}

const char* const kCnSuffix[6] = {"alpha", "de", "dc", "dtau1", "dtau2", "0"};
const char* const kOffsetNames[5] = {"dCl", "dCd", "dCT", "dCM", "dCTphi"};

double number(const nlohmann::json& j, const std::string& path, const std::string& key) {
  auto it = j.find(key);
  if (it == j.end()) throw MissingCoefficient(path + key);
  if (!it->is_number()) throw SchemaError("/" + path + key, "expected a number");
  return it->get<double>();
}

template <std::size_t N>
std::array<double, N> numbers(const nlohmann::json& j, const std::string& key) {
  auto it = j.find(key);
  if (it == j.end()) throw MissingCoefficient(key);
  if (!it->is_array() || it->size() != N) throw SchemaError("/" + key, "expected an array of " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!(*it)[i].is_number()) throw SchemaError("/" + key + "/" + std::to_string(i), "expected a number");
    out[i] = (*it)[i].get<double>();
  }
  return out;
}

double mach_inv2(const AhfvCoefficients& c, double V) {
  const double M = V / c.M0;
  return 1.0 / (M * M);
}

// Damped Newton with a forward-difference Jacobian.
VectorXd newton(const std::function<VectorXd(const VectorXd&)>& F, VectorXd x, double& residual) {
  VectorXd r = F(x);
  for (int it = 0; it < 100 && r.norm() > 1e-13; ++it) {
    Eigen::MatrixXd J(r.size(), x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double h = 1e-7 * std::max(1.0, std::abs(x(k)));
      VectorXd xp = x;
      xp(k) += h;
      J.col(k) = (F(xp) - r) / h;
    }
    const VectorXd step = J.colPivHouseholderQr().solve(-r);
    double lambda = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
      const VectorXd trial = x + lambda * step;
      const VectorXd rt = F(trial);
      if (rt.allFinite() && rt.norm() < r.norm()) {
        x = trial;
        r = rt;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  residual = r.norm();
  return x;
}

}  // namespace

std::vector<std::string> coefficient_fields() {
  std::vector<std::string> out;
  for (const auto& f : scalar_fields()) out.emplace_back(f.name);
  for (int i = 1; i <= 3; ++i)
    for (const char* s : kCnSuffix) out.push_back("CN" + std::to_string(i) + "_" + s);
  out.insert(out.end(), {"omega_m", "E1", "E2"});
  for (const char* s : kOffsetNames) out.push_back(std::string("offsets.") + s);
  return out;
}

void AhfvCoefficients::check() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw Error(std::string("coefficient '") + name + "' must be positive");
  };
  positive(mass, "mass");
  positive(Iyy, "Iyy");
  positive(S, "S");
  positive(omega_n, "omega_n");
  positive(rho0, "rho0");
  positive(hs, "hs");
  positive(M0, "M0");
  for (double w : omega_m) positive(w, "omega_m");
  if (!(zeta_m > 0.0 && zeta_m <= 1.0)) throw Error("coefficient 'zeta_m' must lie in (0, 1]");
  if (!(zeta > 0.0 && zeta <= 1.0)) throw Error("coefficient 'zeta' must lie in (0, 1]");
  if (!(h_min < h_max)) throw Error("altitude envelope requires h_min < h_max");
  if (CL_dc == 0.0) throw Error("coefficient 'CL_dc' must be nonzero (interconnect elimination)");
}

AhfvCoefficients coefficients_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("", "coefficient document must be an object");
  AhfvCoefficients c;
  for (const auto& f : scalar_fields()) c.*(f.member) = number(j, "", f.name);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 6; ++k)
      c.CN[i][k] = number(j, "", "CN" + std::to_string(i + 1) + "_" + kCnSuffix[k]);
  c.omega_m = numbers<3>(j, "omega_m");
  c.E1 = numbers<3>(j, "E1");
  c.E2 = numbers<3>(j, "E2");
  auto off = j.find("offsets");
  if (off == j.end()) throw MissingCoefficient("offsets");
  for (std::size_t k = 0; k < 5; ++k) c.offsets[k] = number(*off, "offsets.", kOffsetNames[k]);
  c.check();
  return c;
}

nlohmann::json coefficients_to_json(const AhfvCoefficients& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : scalar_fields()) j[f.name] = c.*(f.member);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 6; ++k) j["CN" + std::to_string(i + 1) + "_" + kCnSuffix[k]] = c.CN[i][k];
  j["omega_m"] = c.omega_m;
  j["E1"] = c.E1;
  j["E2"] = c.E2;
  for (std::size_t k = 0; k < 5; ++k) j["offsets"][kOffsetNames[k]] = c.offsets[k];
  return j;
}

std::vector<std::string> parameter_names() {
  return {"CL_alpha", "CM_dc", "CTphi_alpha_Minv2", "CTphi_Minv2", "dCl", "dCd", "dCT", "dCM", "dCTphi"};
}

std::vector<double> nominal_parameters(const AhfvCoefficients& c) {
  return {c.CL_alpha, c.CM_dc, c.CTphi_aM2, c.CTphi_M2,
          c.offsets[0], c.offsets[1], c.offsets[2], c.offsets[3], c.offsets[4]};
}

plant::Box parameter_box(std::span<const double> p0) {
  std::vector<double> lo(p0.size()), hi(p0.size());
  for (std::size_t i = 0; i < p0.size(); ++i) {
    lo[i] = std::min(0.9 * p0[i], 1.1 * p0[i]);
    hi[i] = std::max(0.9 * p0[i], 1.1 * p0[i]);
  }
  return plant::Box(std::move(lo), std::move(hi));
}

AhfvCoefficients with_parameters(const AhfvCoefficients& c, std::span<const double> p) {
  if (p.size() != kParamCount) throw Error("AHFV parameter vector must have 9 entries");
  AhfvCoefficients out = c;
  out.CL_alpha = p[0];
  out.CM_dc = p[1];
  out.CTphi_aM2 = p[2];
  out.CTphi_M2 = p[3];
  out.dCL = p[4] - c.offsets[0];
  out.dCD = p[5] - c.offsets[1];
  out.dCT = p[6] - c.offsets[2];
  out.dCM = p[7] - c.offsets[3];
  out.dCTphi = p[8] - c.offsets[4];
  return out;
}

std::vector<std::string> truth_state_names() {
  return {"V", "gamma", "h", "alpha", "Q", "n1", "n2", "n3", "n1dot", "n2dot", "n3dot", "phi", "phidot"};
}

double density(const AhfvCoefficients& c, double h) {
  if (!(h >= c.h_min && h <= c.h_max)) {
    std::ostringstream os;
    os << "altitude " << h << " outside the density envelope [" << c.h_min << ", " << c.h_max << "]";
    throw DensityDomainError(os.str());
  }
  return c.rho0 * std::exp(-(h - c.h0) / c.hs);
}

Forces forces_moments(const VectorXd& s, const Controls& u, const AhfvCoefficients& c) {
  if (s.size() != kTruthDim) throw Error("AHFV truth state must have 13 entries");
  const double V = s(kV), h = s(kH), a = s(kAlpha);
  const Eigen::Vector3d n(s(kN1), s(kN2), s(kN3));
  Forces F;
  F.dtau1 = Eigen::Vector3d(c.E1[0], c.E1[1], c.E1[2]).dot(n);
  F.dtau2 = Eigen::Vector3d(c.E2[0], c.E2[1], c.E2[2]).dot(n);
  F.qbar = 0.5 * density(c, h) * V * V;
  F.mach = V / c.M0;
  const double mi2 = 1.0 / (F.mach * F.mach);
  const double t1 = F.dtau1, t2 = F.dtau2;
  const double at = a + t1;

  const double CL = c.CL_alpha * a + c.CL_de * u.de + c.CL_dc * u.dc + c.CL_t1 * t1 + c.CL_t2 * t2 + c.CL_0 + c.dCL;
  const double CM = c.CM_alpha * a + c.CM_de * u.de + c.CM_dc * u.dc + c.CM_t1 * t1 + c.CM_t2 * t2 + c.CM_0 + c.dCM;
  const double CD = c.CD_a2 * at * at + c.CD_a * at + c.CD_de2 * u.de * u.de + c.CD_de * u.de +
                    c.CD_dc2 * u.dc * u.dc + c.CD_dc * u.dc + c.CD_ade * a * u.de + c.CD_adc * a * u.dc +
                    c.CD_t1 * t1 + c.CD_0 + c.dCD;
  const double CTphi = c.CTphi_alpha * a + c.CTphi_aM2 * a * mi2 + c.CTphi_at1 * a * t1 + c.CTphi_M2 * mi2 +
                       c.CTphi_t1sq * t1 * t1 + c.CTphi_t1 * t1 + c.CTphi_0 + c.dCTphi;
  const double CT = c.CT_Ad * u.Ad + c.CT_alpha * a + c.CT_M2 * mi2 + c.CT_t1 * t1 + c.CT_0 + c.dCT;

  F.L = F.qbar * c.S * CL;
  F.D = F.qbar * c.S * CD;
  F.T = F.qbar * (u.phi * CTphi + CT);
  F.Myy = c.zT * F.T + F.qbar * c.S * c.cbar * CM;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& k = c.CN[i];
    F.N[i] = F.qbar * (k[0] * a + k[1] * u.de + k[2] * u.dc + k[3] * t1 + k[4] * t2 + k[5]);
  }
  return F;
}

VectorXd truth_dynamics(const VectorXd& s, const Eigen::Vector2d& command, const AhfvCoefficients& c) {
  const double V = s(kV), gam = s(kGamma), a = s(kAlpha);
  if (!(V > 0.0)) throw Error("AHFV truth dynamics require V > 0");
  Controls u;
  u.de = command(0);
  u.dc = c.interconnect * command(0);
  u.phi = s(kPhi);
  u.Ad = c.Ad;
  const Forces F = forces_moments(s, u, c);
  VectorXd d(kTruthDim);
  d(kV) = (F.T * std::cos(a) - F.D) / c.mass - c.g * std::sin(gam);
  d(kGamma) = (F.L + F.T * std::sin(a)) / (c.mass * V) - c.g * std::cos(gam) / V;
  d(kH) = V * std::sin(gam);
  d(kAlpha) = s(kQ) - d(kGamma);
  d(kQ) = F.Myy / c.Iyy;
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double w = c.omega_m[static_cast<std::size_t>(i)];
    d(kN1 + i) = s(kN1d + i);
    d(kN1d + i) = -2.0 * c.zeta_m * w * s(kN1d + i) - w * w * s(kN1 + i) + F.N[static_cast<std::size_t>(i)];
  }
  d(kPhi) = s(kPhid);
  d(kPhid) = -2.0 * c.zeta * c.omega_n * s(kPhid) - c.omega_n * c.omega_n * s(kPhi) + c.omega_n * c.omega_n * command(1);
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (!std::isfinite(d(i))) throw sim::NonFiniteDerivative(0.0, static_cast<std::size_t>(i));
  return d;
}

std::array<double, 5> dropped_terms(const VectorXd& s, const Controls& u, const AhfvCoefficients& c) {
  const double a = s(kAlpha);
  const Eigen::Vector3d n(s(kN1), s(kN2), s(kN3));
  const double t1 = Eigen::Vector3d(c.E1[0], c.E1[1], c.E1[2]).dot(n);
  const double t2 = Eigen::Vector3d(c.E2[0], c.E2[1], c.E2[2]).dot(n);
  const double mi2 = mach_inv2(c, s(kV));
  const double at = a + t1;
  const double ceff = c.CM_de - c.CM_dc * c.CL_de / c.CL_dc;

  const double CL_full = c.CL_alpha * a + c.CL_de * u.de + c.CL_dc * u.dc + c.CL_t1 * t1 + c.CL_t2 * t2 + c.CL_0;
  const double CD_full = c.CD_a2 * at * at + c.CD_a * at + c.CD_de2 * u.de * u.de + c.CD_de * u.de +
                         c.CD_dc2 * u.dc * u.dc + c.CD_dc * u.dc + c.CD_ade * a * u.de + c.CD_adc * a * u.dc +
                         c.CD_t1 * t1 + c.CD_0;
  const double CT_full = c.CT_Ad * u.Ad + c.CT_alpha * a + c.CT_M2 * mi2 + c.CT_t1 * t1 + c.CT_0;
  const double CM_full = c.CM_alpha * a + c.CM_de * u.de + c.CM_dc * u.dc + c.CM_t1 * t1 + c.CM_t2 * t2 + c.CM_0;
  const double CTphi_full = c.CTphi_alpha * a + c.CTphi_aM2 * a * mi2 + c.CTphi_at1 * a * t1 + c.CTphi_M2 * mi2 +
                            c.CTphi_t1sq * t1 * t1 + c.CTphi_t1 * t1 + c.CTphi_0;

  const double CL_s = c.CL_alpha * a + c.CL_0;
  const double CD_s = c.CD_a2 * a * a + c.CD_a * a + c.CD_0;
  const double CT_s = c.CT_Ad * u.Ad + c.CT_alpha * a + c.CT_M2 * mi2 + c.CT_0;
  const double CM_s = c.CM_alpha * a + ceff * u.de + c.CM_0;
  const double CTphi_s = c.CTphi_alpha * a + c.CTphi_aM2 * a * mi2 + c.CTphi_M2 * mi2 + c.CTphi_0;
  return {CL_full - CL_s, CD_full - CD_s, CT_full - CT_s, CM_full - CM_s, CTphi_full - CTphi_s};
}

VectorXd Trim::truth_state() const {
  VectorXd s = VectorXd::Zero(kTruthDim);
  s(kV) = V;
  s(kH) = h;
  s(kGamma) = gamma;
  s(kAlpha) = alpha;
  s(kN1) = n[0];
  s(kN2) = n[1];
  s(kN3) = n[2];
  s(kPhi) = phi;
  return s;
}

namespace {

// Simplified rigid-body model as expressions over absolute quantities. `p` are
// the nine parameter expressions.
struct SimplifiedExprs {
  Expr Vdot, gdot, hdot, adot, phidot, phiddot, Qdot;
};

SimplifiedExprs simplified(const AhfvCoefficients& c, const Expr& V, const Expr& h, const Expr& gam, const Expr& a,
                           const Expr& phi, const Expr& phid, const Expr& Q, const Expr& de, const Expr& phic,
                           const std::vector<Expr>& p) {
  const Expr rho = c.rho0 * exp((h - c.h0) * (-1.0 / c.hs));
  const Expr qbar = 0.5 * rho * pow(V, 2);
  const Expr mi2 = (c.M0 * c.M0) * pow(V, -2);
  const Expr CL = p[0] * a + c.CL_0 + p[4];
  const Expr CD = c.CD_a2 * pow(a, 2) + c.CD_a * a + c.CD_0 + p[5];
  const Expr CT = Expr::constant(c.CT_Ad * c.Ad + c.CT_0) + c.CT_alpha * a + c.CT_M2 * mi2 + p[6];
  const Expr CM = c.CM_alpha * a + (c.CM_de - p[1] * (c.CL_de / c.CL_dc)) * de + c.CM_0 + p[7];
  const Expr CTphi = c.CTphi_alpha * a + p[2] * a * mi2 + p[3] * mi2 + c.CTphi_0 + p[8];
  const Expr L = qbar * c.S * CL;
  const Expr D = qbar * c.S * CD;
  const Expr T = qbar * (phi * CTphi + CT);
  const Expr M = c.zT * T + qbar * (c.S * c.cbar) * CM;
  SimplifiedExprs e;
  e.Vdot = (T * cos(a) - D) / c.mass - c.g * sin(gam);
  e.gdot = (L + T * sin(a)) / (c.mass * V) - c.g * cos(gam) / V;
  e.hdot = V * sin(gam);
  e.adot = Q - e.gdot;
  e.phidot = phid;
  e.phiddot = (-2.0 * c.zeta * c.omega_n) * phid - (c.omega_n * c.omega_n) * phi + (c.omega_n * c.omega_n) * phic;
  e.Qdot = M / c.Iyy;
  return e;
}

const std::vector<std::string> kDesignStates = {"V", "h", "gamma", "alpha", "phi", "phidot", "Q"};
const std::vector<std::string> kDesignInputs = {"de", "phic"};

}  // namespace

Trim design_trim(const AhfvCoefficients& c) {
  const expr::VariableSpace space({"alpha", "de", "phi"}, {}, {});
  const Expr a = Expr::variable(space, "alpha"), de = Expr::variable(space, "de"), phi = Expr::variable(space, "phi");
  std::vector<Expr> p;
  for (double v : nominal_parameters(c)) p.push_back(Expr::constant(v));
  const auto e = simplified(c, Expr::constant(c.V_trim), Expr::constant(c.h_trim), Expr::constant(0.0), a, phi,
                            Expr::constant(0.0), Expr::constant(0.0), de, phi, p);
  const std::vector<Expr> outs = {e.Vdot, e.gdot, e.Qdot};
  const expr::Tape tape(outs);
  auto F = [&](const VectorXd& z) {
    const std::vector<double> vals(z.data(), z.data() + z.size());
    const auto r = tape.eval(vals);
    return VectorXd(Eigen::Map<const VectorXd>(r.data(), 3));
  };
  Trim t;
  t.V = c.V_trim;
  t.h = c.h_trim;
  double res = 0.0;
  const VectorXd z = newton(F, VectorXd::Constant(3, 0.01), res);
  t.alpha = z(0);
  t.de = z(1);
  t.phi = z(2);
  t.residual = res;
  if (!(res < 1e-8)) throw Error("AHFV design trim did not converge (residual " + std::to_string(res) + ")");
  return t;
}

Trim truth_trim(const AhfvCoefficients& c, const Trim& guess) {
  auto F = [&](const VectorXd& z) {
    Trim t = guess;
    t.alpha = z(0);
    t.de = z(1);
    t.phi = z(2);
    t.n = {z(3), z(4), z(5)};
    const VectorXd d = truth_dynamics(t.truth_state(), t.command(), c);
    VectorXd r(6);
    r << d(kV), d(kGamma), d(kQ), d(kN1d), d(kN2d), d(kN3d);
    return r;
  };
  VectorXd z0(6);
  z0 << guess.alpha, guess.de, guess.phi, guess.n[0], guess.n[1], guess.n[2];
  Trim t = guess;
  double res = 0.0;
  const VectorXd z = newton(F, z0, res);
  t.alpha = z(0);
  t.de = z(1);
  t.phi = z(2);
  t.n = {z(3), z(4), z(5)};
  t.residual = res;
  if (!(res < 1e-8)) throw Error("AHFV truth trim did not converge (residual " + std::to_string(res) + ")");
  return t;
}

DesignPlant simplified_design_plant(const AhfvCoefficients& c, std::array<double, 2> output_units) {
  c.check();
  if (!(output_units[0] > 0.0 && output_units[1] > 0.0)) throw Error("output units must be positive");
  const Trim trim = design_trim(c);
  const auto pnames = parameter_names();
  expr::VariableSpace space(kDesignStates, kDesignInputs, pnames);
  std::vector<Expr> x, p;
  for (const auto& s : kDesignStates) x.push_back(Expr::variable(space, s));
  for (const auto& s : pnames) p.push_back(Expr::variable(space, s));

  // Absolute quantities; inputs at trim, the input deviations enter through g.
  const Expr V = trim.V + x[0], h = trim.h + x[1], gam = x[2] + trim.gamma, a = trim.alpha + x[3];
  const Expr phi = trim.phi + x[4];
  const Expr de_t = Expr::constant(trim.de), phic_t = Expr::constant(trim.phi);
  const auto e = simplified(c, V, h, gam, a, phi, x[5], x[6], de_t, phic_t, p);
  std::vector<Expr> F = {e.Vdot, e.hdot, e.gdot, e.adot, e.phidot, e.phiddot, e.Qdot};

  // Subtract the drift at the trim state for every p so that f(0, p) = 0.
  std::vector<std::optional<Expr>> at_trim(space.size());
  for (std::size_t i = 0; i < kDesignStates.size(); ++i) at_trim[i] = Expr::constant(0.0);
  std::vector<Expr> f;
  for (const auto& fi : F) f.push_back(fi - expr::substitute(fi, at_trim));

  const Expr rho = c.rho0 * exp((h - c.h0) * (-1.0 / c.hs));
  const Expr qbar = 0.5 * rho * pow(V, 2);
  const Expr ceff = c.CM_de - p[1] * (c.CL_de / c.CL_dc);
  std::vector<std::vector<Expr>> g(7, std::vector<Expr>(2, Expr::constant(0.0)));
  g[6][0] = qbar * (c.S * c.cbar / c.Iyy) * ceff;
  g[5][1] = Expr::constant(c.omega_n * c.omega_n);

  DesignPlant out;
  out.trim = trim;
  out.plant.space = space;
  out.plant.f = std::move(f);
  out.plant.g = std::move(g);
  out.plant.outputs = {x[0] * (1.0 / output_units[0]), x[1] * (1.0 / output_units[1])};
  out.plant.p0 = nominal_parameters(c);
  out.plant.omega = parameter_box(out.plant.p0);
  plant::check_structure(out.plant);
  return out;
}

feedlin::Diffeomorphism ahfv_transform(const plant::DecomposedPlant& plant) {
  if (plant.plant.n() != 7 || plant.plant.m() != 2) throw Error("AHFV transform expects the 7-state, 2-input design plant");
  feedlin::RelativeDegreeProfile profile;
  profile.r = {3, 4};
  return feedlin::build_transform(plant, profile, true);
}

AhfvTruth::AhfvTruth(AhfvCoefficients c, Trim design) : c_(std::move(c)), trim_(design) {}

VectorXd AhfvTruth::derivative(double, const VectorXd& x, const VectorXd& u, const VectorXd& p) const {
  const AhfvCoefficients cp = with_parameters(c_, std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
  return truth_dynamics(x, Eigen::Vector2d(u(0), u(1)), cp);
}

VectorXd AhfvTruth::design_state(const VectorXd& s) const {
  VectorXd d(7);
  d << s(kV) - trim_.V, s(kH) - trim_.h, s(kGamma) - trim_.gamma, s(kAlpha) - trim_.alpha, s(kPhi) - trim_.phi,
      s(kPhid), s(kQ);
  return d;
}

VectorXd AhfvTruth::input_offset() const { return trim_.command(); }

}  // namespace robolin::ahfv
