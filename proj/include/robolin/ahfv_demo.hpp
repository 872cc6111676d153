#pragma once

// End-to-end AHFV tracking demo: design on the simplified plant, simulate the
// full truth model under sinusoidal parameter variation, score the run.

#include <array>
#include <optional>

#include "robolin/ahfv.hpp"
#include "robolin/pipeline.hpp"

namespace robolin::ahfv {

struct DemoConfig {
  AhfvCoefficients coefficients;
  std::array<double, 2> output_units{100.0, 1000.0};  // ft/s, ft per design-output unit
  std::array<double, 2> command{0.2, 0.2};             // step sizes in output units
  double t_command = 1.0;
  double t_final = 200.0;
  double dt = 0.005;
  // p_i(t) = p0_i (1 + variation sin(frequency_i t + phase_i))
  double variation = 0.1;
  std::vector<double> frequency;  // rad/s, one per parameter
  std::vector<double> phase;
  std::uint64_t noise_seed = 1;
  double noise_intensity = 0.0;
  std::array<double, 2> de_limits{-0.349, 0.349};   // absolute elevator deflection, rad
  std::array<double, 2> phic_limits{0.05, 1.5};     // absolute fuel-ratio command

  // hyper-rectangle from LQR-pilot runs on the design plant
  double pilot_weight = 1e-4;  // state weight of the pilot LQR (unit input weight)
  double pilot_horizon = 60.0;
  double pilot_dt = 0.01;
  double inflation = 2.0;
  double chi_floor = 1e-4;
  double v_floor = 1e-5;

  pipeline::Options design;  // conventions, weights, search, plan, verify, region
  std::size_t validate_samples = 200;

  double settle_fraction = 0.25;  // tracking is scored over this trailing part of the run
  double tracking_tolerance = 0.02;
  double cost_margin = 1.05;
};

/// Defaults used by the bundled demo (measured set, E1, weights, search).
DemoConfig default_demo_config(AhfvCoefficients c);

struct PilotEnvelope {
  meanval::HyperBox box;
  Eigen::VectorXd chi_peak, v_peak;
};

/// Closed-loop LQR runs of the linearized design plant at p0 and at the two
/// extreme corners of Omega; the box is inflation * peak + floor.
PilotEnvelope pilot_box(const pipeline::Linearization& lin, const DemoConfig& config);

sim::Scenario demo_scenario(const DemoConfig& config, const plant::UncertainPlant& plant, const Trim& truth);

struct DemoMetrics {
  bool bounded = false;
  std::array<double, 2> max_error{};  // over the settle window, output units
  std::array<double, 2> tolerance{};
  bool tracking = false;
  sim::IqcReport iqc;
  double J = 0.0;
  double W = 0.0;
  bool cost = false;
  bool passed() const { return bounded && tracking && iqc.holds && cost; }
};

DemoMetrics score_demo(const sim::TimeSeries& ts, const DemoConfig& config, const minimax::SynthesisWeights& w,
                       double W);

struct DemoDesign {
  DesignPlant plant;
  Trim truth_trim;
  pipeline::Linearization lin;
  PilotEnvelope envelope;
  pipeline::Result result;
};

/// Validate, linearize, bound, synthesize, verify. Throws minimax::NoFeasibleTau
/// when no tau is feasible.
DemoDesign design_demo(const DemoConfig& config);

struct DemoRun {
  DemoDesign design;
  sim::Scenario scenario;
  sim::TimeSeries series;
  DemoMetrics metrics;
};

DemoRun run_demo(const DemoConfig& config);

}  // namespace robolin::ahfv
