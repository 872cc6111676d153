#pragma once

// Fixed-step closed-loop simulation: truth plant, inner linearizing law, outer
// minimax LQG controller, time-varying parameters, cost and IQC diagnostics.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "robolin/feedlin.hpp"
#include "robolin/meanval.hpp"
#include "robolin/minimax.hpp"
#include "robolin/plant.hpp"

namespace robolin::sim {

class NonFiniteDerivative : public Error {
 public:
  NonFiniteDerivative(double t, std::size_t component);
  double t() const noexcept { return t_; }
  std::size_t component() const noexcept { return component_; }

 private:
  double t_;
  std::size_t component_;
};

using Derivative = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

/// Classical fourth-order Runge-Kutta step.
Eigen::VectorXd rk4_step(const Derivative& f, double t, const Eigen::VectorXd& x, double dt);

/// The plant that is actually simulated. It may carry dynamics the design
/// plant omits; `design_state` maps its state to design-plant coordinates.
class TruthModel {
 public:
  virtual ~TruthModel() = default;
  virtual std::vector<std::string> state_names() const = 0;
  virtual std::size_t input_count() const = 0;
  virtual Eigen::VectorXd derivative(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& p) const = 0;
  virtual Eigen::VectorXd design_state(const Eigen::VectorXd& x) const = 0;
  /// Absolute input = offset + design input.
  virtual Eigen::VectorXd input_offset() const { return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(input_count())); }
};

/// Truth model given by the uncertain plant itself.
class PlantTruth : public TruthModel {
 public:
  explicit PlantTruth(const plant::UncertainPlant& plant);
  std::vector<std::string> state_names() const override { return plant_.space.state_names(); }
  std::size_t input_count() const override { return plant_.m(); }
  Eigen::VectorXd derivative(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& p) const override;
  Eigen::VectorXd design_state(const Eigen::VectorXd& x) const override { return x; }

 private:
  plant::UncertainPlant plant_;
  std::shared_ptr<const expr::Tape> tape_;  // [f, g row major]
};

struct ParameterSignal {
  enum class Kind { kConstant, kSinusoid, kPiecewise };
  Kind kind = Kind::kConstant;
  double value = 0.0;      // constant value, or sinusoid center
  double amplitude = 0.0;  // sinusoid
  double frequency = 0.0;  // rad/s
  double phase = 0.0;
  std::vector<double> times, values;  // piecewise linear, held outside
  double at(double t) const;
};

struct ReferenceSegment {
  enum class Kind { kStep, kRamp, kHold };
  Kind kind = Kind::kStep;
  double t0 = 0.0;
  double value = 0.0;  // step target or ramp end value
  double rate = 0.0;   // ramp slope magnitude
};

/// Segments apply in order once t >= t0; the command starts at 0.
struct ReferenceSchedule {
  std::vector<ReferenceSegment> segments;
  double at(double t) const;
};

struct Scenario {
  std::vector<ParameterSignal> parameters;   // one per plant parameter
  std::vector<ReferenceSchedule> references;  // one per output, design-output units
  Eigen::VectorXd x0;                        // truth initial state
  double t_final = 1.0;
  double dt = 0.005;
  std::uint64_t noise_seed = 1;
  double noise_intensity = 0.0;     // measurement noise on y~, unit-intensity scale
  std::vector<double> u_lower, u_upper;  // absolute input limits, empty for none
  double blowup = 1e6;              // abort when any |x_i| exceeds this
};

/// Throws robolin::Error when dt, t_final or the parameter path violate the
/// scenario invariants (parameters are checked at every sample time).
void validate_scenario(const Scenario& s, const plant::Box& omega);

/// Everything the loop needs from the design pipeline.
struct Design {
  plant::DecomposedPlant plant;
  feedlin::LieChain chain;  // nominal
  feedlin::Diffeomorphism transform;
  meanval::LinearizedDesignModel model;
  minimax::Controller controller;
};

struct TimeSeries {
  std::vector<std::string> x_names, chi_names, u_names, y_names;
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x, chi, chihat, u, v, y, ref;
  std::vector<double> zeta1_norm, z_norm;
  std::vector<std::vector<std::uint8_t>> saturated;
  bool aborted = false;
  std::string status = "ok";

  std::size_t rows() const { return t.size(); }
  double dt() const { return t.size() > 1 ? t[1] - t[0] : 0.0; }
  std::vector<std::string> header() const;
  std::vector<double> row(std::size_t k) const;
};

TimeSeries simulate_closed_loop(const Scenario& scenario, const TruthModel& truth, const Design& design);

/// J = 1/(2T) sum dt (chi'R chi + v'G v), left rectangle rule over the rows.
double evaluate_cost(const TimeSeries& ts, const minimax::SynthesisWeights& w);

struct IqcReport {
  double lhs = 0.0;  // sum dt ||zeta1||^2
  double rhs = 0.0;  // sum dt ||z||^2
  double margin = 0.0;
  bool holds = false;
};
IqcReport check_iqc(const TimeSeries& ts, double tolerance = 1e-9);

/// Header plus one row per logged sample; shortest round-trip decimals.
void export_csv(const TimeSeries& ts, const std::string& path);
std::string to_csv(const TimeSeries& ts);

}  // namespace robolin::sim
