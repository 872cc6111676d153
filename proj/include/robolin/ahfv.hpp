#pragma once

// Air-breathing hypersonic vehicle: curve-fit truth model (rigid body,
// flexible modes, fuel actuator), trim, and the simplified uncertain design
// plant used for feedback linearization.

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "robolin/feedlin.hpp"
#include "robolin/plant.hpp"
#include "robolin/sim.hpp"

#include "json.hpp"

namespace robolin::ahfv {

class MissingCoefficient : public Error {
 public:
  explicit MissingCoefficient(std::string field) : Error("missing coefficient '" + field + "'"), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class DensityDomainError : public Error {
 public:
  using Error::Error;
};

struct AhfvCoefficients {
  // lift, moment: alpha, delta_e, delta_c, dtau1, dtau2, constant
  double CL_alpha = 0, CL_de = 0, CL_dc = 0, CL_t1 = 0, CL_t2 = 0, CL_0 = 0;
  double CM_alpha = 0, CM_de = 0, CM_dc = 0, CM_t1 = 0, CM_t2 = 0, CM_0 = 0;
  // drag
  double CD_a2 = 0, CD_a = 0, CD_de2 = 0, CD_de = 0, CD_dc2 = 0, CD_dc = 0, CD_ade = 0, CD_adc = 0, CD_t1 = 0, CD_0 = 0;
  // thrust per unit fuel ratio
  double CTphi_alpha = 0, CTphi_aM2 = 0, CTphi_at1 = 0, CTphi_M2 = 0, CTphi_t1sq = 0, CTphi_t1 = 0, CTphi_0 = 0;
  // thrust independent of fuel ratio
  double CT_Ad = 0, CT_alpha = 0, CT_M2 = 0, CT_t1 = 0, CT_0 = 0;
  // generalized forces, per mode: alpha, delta_e, delta_c, dtau1, dtau2, constant
  std::array<std::array<double, 6>, 3> CN{};
  // geometry and inertia
  double mass = 0, Iyy = 0, S = 0, cbar = 0, zT = 0, g = 0;
  // atmosphere rho(h) = rho0 exp(-(h - h0) / hs), valid on [h_min, h_max]
  double rho0 = 0, h0 = 0, hs = 0, h_min = 0, h_max = 0, M0 = 0;
  // flexible modes and the fuel actuator
  double zeta_m = 0;
  std::array<double, 3> omega_m{};
  std::array<double, 3> E1{}, E2{};
  double zeta = 0, omega_n = 0;
  double interconnect = 0;  // delta_c = interconnect * delta_e
  double Ad = 1.0;
  // design point and nominal values of the lumped uncertainty offsets
  double V_trim = 0, h_trim = 0;
  std::array<double, 5> offsets{};  // dC_l, dC_d, dC_T, dC_M, dC_Tphi
  // additive truth-only perturbations (set from a parameter vector)
  double dCL = 0, dCD = 0, dCT = 0, dCM = 0, dCTphi = 0;

  /// Invariant check; throws robolin::Error.
  void check() const;
};

AhfvCoefficients coefficients_from_json(const nlohmann::json& j);
nlohmann::json coefficients_to_json(const AhfvCoefficients& c);
/// Names of all required JSON fields.
std::vector<std::string> coefficient_fields();

constexpr std::size_t kParamCount = 9;
/// p = [CL_alpha, CM_dc, CTphi_aM2, CTphi_M2, dC_l, dC_d, dC_T, dC_M, dC_Tphi].
std::vector<std::string> parameter_names();
std::vector<double> nominal_parameters(const AhfvCoefficients& c);
/// Omega = [min, max](0.9 p0, 1.1 p0) per component.
plant::Box parameter_box(std::span<const double> p0);
/// Coefficients with p substituted (first four replaced, offsets added relative to nominal).
AhfvCoefficients with_parameters(const AhfvCoefficients& c, std::span<const double> p);

// truth state layout
enum TruthIndex : Eigen::Index { kV = 0, kGamma, kH, kAlpha, kQ, kN1, kN2, kN3, kN1d, kN2d, kN3d, kPhi, kPhid, kTruthDim };
std::vector<std::string> truth_state_names();

struct Controls {
  double de = 0, dc = 0, phi = 0, Ad = 1;
};

struct Forces {
  double L = 0, D = 0, T = 0, Myy = 0;
  std::array<double, 3> N{};
  double qbar = 0, mach = 0;
  double dtau1 = 0, dtau2 = 0;
};

double density(const AhfvCoefficients& c, double h);
Forces forces_moments(const Eigen::VectorXd& s, const Controls& u, const AhfvCoefficients& c);

/// Full truth derivative; `command` = [delta_e, phi_c].
Eigen::VectorXd truth_dynamics(const Eigen::VectorXd& s, const Eigen::Vector2d& command, const AhfvCoefficients& c);

/// The dropped force-coefficient terms at a truth state: the values dC_l, dC_d,
/// dC_T, dC_M, dC_Tphi that make the simplified polynomials equal the full ones.
std::array<double, 5> dropped_terms(const Eigen::VectorXd& s, const Controls& u, const AhfvCoefficients& c);

struct Trim {
  double V = 0, h = 0, gamma = 0, alpha = 0, de = 0, phi = 0;
  std::array<double, 3> n{};  // truth trim only
  double residual = 0;
  Eigen::VectorXd truth_state() const;
  Eigen::Vector2d command() const { return {de, phi}; }
};

/// Damped Newton on V' = gamma' = Q' = 0 for the simplified model at nominal parameters.
Trim design_trim(const AhfvCoefficients& c);
/// Same for the truth model, including static modal deflections.
Trim truth_trim(const AhfvCoefficients& c, const Trim& guess);

struct DesignPlant {
  plant::UncertainPlant plant;  // deviation coordinates about `trim`
  Trim trim;
};

/// 7 states [V, h, gamma, alpha, phi, phidot, Q] as deviations from trim,
/// inputs [de, phic] as deviations from trim, 9 parameters. Outputs are the V
/// and h deviations divided by `output_units` (e.g. {100, 1000} reports V in
/// units of 100 ft/s and h in kft).
DesignPlant simplified_design_plant(const AhfvCoefficients& c, std::array<double, 2> output_units = {1.0, 1.0});

/// Integral-augmented 9-entry transform [xi1..xi4, eta1..eta5].
feedlin::Diffeomorphism ahfv_transform(const plant::DecomposedPlant& plant);

/// Truth model for the simulator, in absolute units.
class AhfvTruth : public sim::TruthModel {
 public:
  AhfvTruth(AhfvCoefficients c, Trim design);
  std::vector<std::string> state_names() const override { return truth_state_names(); }
  std::size_t input_count() const override { return 2; }
  Eigen::VectorXd derivative(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& p) const override;
  Eigen::VectorXd design_state(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd input_offset() const override;

 private:
  AhfvCoefficients c_;
  Trim trim_;
};

}  // namespace robolin::ahfv
