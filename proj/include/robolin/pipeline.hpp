#pragma once

// The design chain from an uncertain plant to a verified controller:
// feedback linearization, rho bound, design model, tau search, controller.

#include <optional>

#include "robolin/sim.hpp"

namespace robolin::pipeline {

struct Options {
  plant::Box region;           // state region for the relative-degree certificate
  std::uint64_t seed = 1;
  std::size_t degree_samples = 200;
  bool integrators = true;
  meanval::HyperBox box;       // chi and v bounds; unused when rho is given
  meanval::SamplingPlan plan;
  std::optional<double> rho;   // skip bounding and use this value
  meanval::AssemblyConventions conventions;
  minimax::SynthesisWeights weights;
  minimax::TauSearch search;
  minimax::VerifyOptions verify;
};

struct Result {
  sim::Design design;
  feedlin::RelativeDegreeResult degrees;
  std::optional<meanval::UncertaintyBound> bound;
  minimax::TauSearchResult tau;
  minimax::VerificationReport verification;
};

/// Linearize only (relative degree, transform).
struct Linearization {
  plant::DecomposedPlant plant;
  feedlin::RelativeDegreeResult degrees;
  feedlin::Diffeomorphism transform;
  feedlin::BrunovskyModel brunovsky;
};
Linearization linearize(const plant::UncertainPlant& plant, const Options& options);

meanval::UncertaintyBound bound(const Linearization& lin, const Options& options);

Result run(const plant::UncertainPlant& plant, const Options& options);
Result run(const Linearization& lin, const Options& options);

}  // namespace robolin::pipeline
