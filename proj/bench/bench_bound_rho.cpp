#include <benchmark/benchmark.h>

#include "robolin/io.hpp"

namespace {

using namespace robolin;

struct Fixture {
  pipeline::Linearization lin;
  std::unique_ptr<meanval::TransformedResidualMap> map;
  meanval::HyperBox box;
  meanval::SamplingPlan plan;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    const auto cfg = io::load_config(std::string(ROBOLIN_DATA_DIR) + "/ahfv_demo.json");
    Fixture x;
    const auto plant = ahfv::simplified_design_plant(cfg.demo->coefficients, cfg.demo->output_units);
    x.lin = pipeline::linearize(plant.plant, cfg.demo->design);
    x.map = meanval::build_residual_map(x.lin.plant, x.lin.degrees.chain, x.lin.transform);
    x.box = ahfv::pilot_box(x.lin, *cfg.demo).box;
    x.plan = cfg.demo->design.plan;
    return x;
  }();
  return f;
}

template <bool kParallel>
void BM_BoundRho(benchmark::State& state) {
  const auto& f = fixture();
  auto plan = f.plan;
  plan.random = static_cast<std::size_t>(state.range(0));
  plan.refine_starts = 0;
  const auto& p = f.lin.plant.plant;
  for (auto _ : state) {
    const auto b = kParallel ? meanval::bound_rho(*f.map, f.box, p.omega, p.p0, plan)
                             : meanval::bound_rho_serial(*f.map, f.box, p.omega, p.p0, plan);
    benchmark::DoNotOptimize(b.rho);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_TauSearch(benchmark::State& state) {
  const auto cfg = io::load_config(std::string(ROBOLIN_DATA_DIR) + "/double_integrator.json");
  const auto r = pipeline::run(cfg.plant, cfg.options);
  auto search = cfg.options.search;
  search.parallel = state.range(0) != 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(minimax::optimize_tau(r.design.model, cfg.options.weights, search).best.W);
  }
}

}  // namespace

BENCHMARK(BM_BoundRho<false>)->Name("bound_rho/serial")->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BoundRho<true>)->Name("bound_rho/parallel")->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TauSearch)->Name("optimize_tau")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
