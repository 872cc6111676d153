#pragma once

// Minimax LQG output-feedback synthesis for the uncertain linear design model:
// the tau-parameterized pair of H-infinity type Riccati equations, the cost
// bound W_tau, the tau search and the resulting controller.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "robolin/meanval.hpp"

namespace robolin::minimax {

using meanval::LinearizedDesignModel;

struct SynthesisWeights {
  Eigen::MatrixXd R;  // nbar x nbar, PSD
  Eigen::MatrixXd G;  // m x m, PD
};

/// Which trace formula evaluates W_tau (see README, "Cost bound").
enum class WtauForm {
  kStandard,  // tr[Y R_t + (Y C2' + B2 D2') Gamma^-1 (C2 Y + D2 B2') X (I - Y X / tau)^-1]
  kPrinted,   // tr[(tau Y C2' + B2 D2') Gamma^-1 (tau C2 Y + D2 B2') X (I - Y X)^-1 + tau Y R_t]
};

WtauForm parse_wtau_form(const std::string& name);
std::string to_string(WtauForm form);

class Infeasible : public Error {
 public:
  using Error::Error;
};

class SynthesisInconsistency : public Error {
 public:
  using Error::Error;
};

struct DesignTerms {
  Eigen::MatrixXd R_tau, G_tau, Upsilon, Gamma;
};

/// R_t = R + tau C1'C1, G_t = G + tau D1'D1, Upsilon_t = tau C1'D1, Gamma = D2 D2'.
DesignTerms design_terms(const LinearizedDesignModel& model, const SynthesisWeights& w, double tau);

struct TauCertificate {
  double tau = 0.0;
  Eigen::MatrixXd Y, X;
  double W = std::numeric_limits<double>::infinity();
  bool Y_pd = false, X_pd = false, coupling_pd = false, weight_psd = false;
  double residual_y = 0.0, residual_x = 0.0;  // printed-form Riccati residuals
  std::string reason;                          // empty when feasible

  bool feasible() const { return Y_pd && X_pd && coupling_pd && weight_psd && std::isfinite(W); }
};

/// Solves both Riccati equations at `tau` and evaluates the feasibility flags.
/// Solver failures are reported through `reason`, never thrown.
TauCertificate solve_design_pair(const LinearizedDesignModel& model, const SynthesisWeights& w, double tau,
                                 WtauForm form = WtauForm::kStandard);

/// Residuals of the two Riccati equations exactly as printed.
double y_equation_residual(const LinearizedDesignModel& model, const SynthesisWeights& w, double tau,
                           const Eigen::MatrixXd& Y);
double x_equation_residual(const LinearizedDesignModel& model, const SynthesisWeights& w, double tau,
                           const Eigen::MatrixXd& X);

/// W_tau for given Y, X. Throws Infeasible when the coupling matrix is singular.
double cost_bound(const LinearizedDesignModel& model, const SynthesisWeights& w, double tau,
                  const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X, WtauForm form = WtauForm::kStandard);

struct TauSearch {
  double tau_min = 1e-3;
  double tau_max = 1e3;
  std::size_t grid = 64;          // log-spaced probes
  std::size_t golden_iters = 80;
  WtauForm form = WtauForm::kStandard;
  bool parallel = true;
};

struct TauProbe {
  double tau;
  double W;  // +inf when infeasible
  std::string reason;
};

class NoFeasibleTau : public Error {
 public:
  NoFeasibleTau(const std::string& what, std::vector<TauProbe> probes) : Error(what), probes_(std::move(probes)) {}
  const std::vector<TauProbe>& probes() const noexcept { return probes_; }

 private:
  std::vector<TauProbe> probes_;
};

struct TauSearchResult {
  TauCertificate best;
  std::vector<TauProbe> probes;  // grid probes, then refinement probes
};

/// Log-grid probe followed by golden-section refinement on log tau around the
/// best feasible probe. Deterministic; independent of thread count.
TauSearchResult optimize_tau(const LinearizedDesignModel& model, const SynthesisWeights& w, const TauSearch& search);

struct Controller {
  Eigen::MatrixXd Ac, Bc, K;
  TauCertificate certificate;
  std::string model_fingerprint;
};

/// Throws Infeasible for an infeasible certificate and SynthesisInconsistency
/// when the nominal closed loop is not Hurwitz.
Controller build_controller(const LinearizedDesignModel& model, const SynthesisWeights& w, const TauCertificate& cert);

/// Closed loop [chi; chi_hat] driven by Wbar.
struct ClosedLoop {
  Eigen::MatrixXd A, B;
};
ClosedLoop closed_loop(const LinearizedDesignModel& model, const Controller& c);

struct VerifyOptions {
  std::size_t delta_samples = 64;
  std::uint64_t seed = 1;
};

struct VerificationReport {
  double certificate_norm = 0.0;  // ||T_{Wbar -> [Psi / sqrt(tau); z]}||_inf, must be <= 1
  double psi_norm = 0.0;          // ||T_{Wbar -> Psi}||_inf
  bool bound_holds = false;
  double abscissa = 0.0;
  bool stable = false;
  std::size_t delta_samples = 0;
  double worst_perturbed_abscissa = 0.0;
  bool robustly_stable = false;
};

VerificationReport verify_design(const LinearizedDesignModel& model, const SynthesisWeights& w, const Controller& c,
                                 const VerifyOptions& options = {});

/// Symmetric PSD square root.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S);

}  // namespace robolin::minimax
