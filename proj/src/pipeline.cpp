#include "robolin/pipeline.hpp"

namespace robolin::pipeline {

Linearization linearize(const plant::UncertainPlant& plant, const Options& o) {
  Linearization l;
  l.plant = plant::decompose(plant);
  l.degrees = feedlin::relative_degree(l.plant, o.region, o.seed, o.degree_samples);
  l.transform = feedlin::build_transform(l.plant, l.degrees.profile, o.integrators);
  l.brunovsky = feedlin::brunovsky_form(l.degrees.profile, o.integrators);
  return l;
}

meanval::UncertaintyBound bound(const Linearization& l, const Options& o) {
  const auto map = meanval::build_residual_map(l.plant, l.degrees.chain, l.transform);
  return meanval::bound_rho(*map, o.box, l.plant.plant.omega, l.plant.plant.p0, o.plan);
}

Result run(const plant::UncertainPlant& plant, const Options& o) { return run(linearize(plant, o), o); }

Result run(const Linearization& l, const Options& o) {
  Result r;
  double rho = 0.0;
  if (o.rho) {
    rho = *o.rho;
  } else {
    r.bound = bound(l, o);
    rho = r.bound->rho;
  }
  r.degrees = l.degrees;
  r.design.plant = l.plant;
  r.design.chain = l.degrees.chain;
  r.design.transform = l.transform;
  r.design.model = meanval::assemble_design_model(l.brunovsky, rho, o.conventions);
  r.tau = minimax::optimize_tau(r.design.model, o.weights, o.search);
  r.design.controller = minimax::build_controller(r.design.model, o.weights, r.tau.best);
  r.verification = minimax::verify_design(r.design.model, o.weights, r.design.controller, o.verify);
  return r;
}

}  // namespace robolin::pipeline
