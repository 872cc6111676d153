// robolin: command-line front end for the design pipeline.
//
//   robolin linearize|bound|synth|verify|simulate --config run.json --out dir
//   robolin demo-ahfv [--config data/ahfv_demo.json] --out dir
//
// Exit codes: 0 success, 2 no feasible tau, 1 any other error.

#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "robolin/fileio.hpp"
#include "robolin/io.hpp"

#ifndef ROBOLIN_DATA_DIR
#define ROBOLIN_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace robolin;
using io::json;

namespace {

struct Flags {
  std::string config;
  std::string out = ".";
  std::string controller;  // verify: controller artifact to check
  std::optional<std::uint64_t> seed;
  std::optional<double> tf, dt, tau_min, tau_max;
  std::optional<std::size_t> samples;
  bool quiet = false;
};

class Run {
 public:
  Run(const std::string& command, const Flags& flags) : command_(command), flags_(flags) {}

  int execute();

 private:
  void log(const std::string& line) const {
    if (!flags_.quiet) std::cerr << line << "\n";
  }
  std::string path(const std::string& name) const { return (fs::path(flags_.out) / name).string(); }
  void write(const std::string& name, const std::string& kind, const json& payload) {
    json inputs = base_inputs_;
    for (const auto& [k, v] : extra_inputs_.items()) inputs[k] = v;
    const json a = io::make_artifact(kind, inputs, payload);
    io::write_json(path(name), a);
    fingerprints_[kind] = a["fingerprint"];
    log("wrote " + path(name));
  }

  void load();
  void apply_overrides();
  int linearize_stage();
  int bound_stage();
  int synth_stage();
  int verify_stage();
  int simulate_stage();
  int demo_stage();
  void write_design(const pipeline::Result& r, const meanval::HyperBox& box);

  std::string command_;
  Flags flags_;
  io::RunConfig cfg_;
  json base_inputs_, extra_inputs_ = json::object(), fingerprints_ = json::object();
};

void Run::load() {
  std::string cfg_path = flags_.config;
  if (cfg_path.empty()) {
    if (command_ != "demo-ahfv") throw Error("--config is required");
    cfg_path = std::string(ROBOLIN_DATA_DIR) + "/ahfv_demo.json";
  }
  cfg_ = io::load_config(cfg_path);
  if (command_ == "demo-ahfv" && !cfg_.ahfv) throw Error("demo-ahfv needs a config with \"plant\": \"ahfv\"");
  if (command_ != "demo-ahfv" && cfg_.ahfv && (command_ == "simulate")) {
    throw Error("use demo-ahfv to simulate the builtin AHFV plant");
  }
  apply_overrides();
}

void Run::apply_overrides() {
  json overrides = json::object();
  auto& o = cfg_.options;
  if (flags_.seed) {
    overrides["seed"] = *flags_.seed;
    o.seed = o.plan.seed = o.verify.seed = *flags_.seed;
    if (cfg_.scenario) cfg_.scenario->noise_seed = *flags_.seed;
    if (cfg_.demo) cfg_.demo->noise_seed = *flags_.seed;
  }
  if (flags_.samples) {
    overrides["samples"] = *flags_.samples;
    o.plan.random = *flags_.samples;
  }
  if (flags_.tau_min) {
    overrides["tau_min"] = *flags_.tau_min;
    o.search.tau_min = *flags_.tau_min;
  }
  if (flags_.tau_max) {
    overrides["tau_max"] = *flags_.tau_max;
    o.search.tau_max = *flags_.tau_max;
  }
  if (!(o.search.tau_min > 0.0 && o.search.tau_min < o.search.tau_max)) {
    throw Error("tau bracket must satisfy 0 < tau_min < tau_max");
  }
  if (flags_.tf) {
    overrides["tf"] = *flags_.tf;
    if (cfg_.scenario) cfg_.scenario->t_final = *flags_.tf;
    if (cfg_.demo) cfg_.demo->t_final = *flags_.tf;
  }
  if (flags_.dt) {
    overrides["dt"] = *flags_.dt;
    if (cfg_.scenario) cfg_.scenario->dt = *flags_.dt;
    if (cfg_.demo) cfg_.demo->dt = *flags_.dt;
  }
  if (cfg_.demo) cfg_.demo->design = o;
  base_inputs_ = {{"config", cfg_.fingerprint}};
  if (!overrides.empty()) base_inputs_["overrides"] = io::fingerprint(overrides);
  if (!cfg_.coefficients_fingerprint.empty()) base_inputs_["coefficients"] = cfg_.coefficients_fingerprint;
}

pipeline::Linearization linearize_config(const io::RunConfig& cfg) {
  if (cfg.ahfv) {
    const auto plant = ahfv::simplified_design_plant(cfg.demo->coefficients, cfg.demo->output_units);
    return pipeline::linearize(plant.plant, cfg.options);
  }
  return pipeline::linearize(cfg.plant, cfg.options);
}

int Run::linearize_stage() {
  const auto lin = linearize_config(cfg_);
  write("linearization.json", "linearization", io::linearization_to_json(lin));
  return 0;
}

int Run::bound_stage() {
  const auto lin = linearize_config(cfg_);
  auto o = cfg_.options;
  if (cfg_.ahfv) o.box = ahfv::pilot_box(lin, *cfg_.demo).box;
  json payload;
  if (o.rho) {
    payload = {{"rho", *o.rho}, {"source", "config"}};
  } else {
    payload = io::bound_to_json(pipeline::bound(lin, o), o.box);
    payload["source"] = "sampled";
  }
  write("bound.json", "bound", payload);
  return 0;
}

void Run::write_design(const pipeline::Result& r, const meanval::HyperBox& box) {
  if (r.bound) {
    json b = io::bound_to_json(*r.bound, box);
    b["source"] = "sampled";
    write("bound.json", "bound", b);
  }
  const json model = io::design_model_to_json(r.design.model);
  write("design_model.json", "design_model", model);
  auto c = r.design.controller;
  c.model_fingerprint = io::fingerprint(model);
  json payload = io::controller_to_json(c);
  json probes = json::array();
  for (const auto& p : r.tau.probes) {
    probes.push_back({{"tau", p.tau}, {"W", std::isfinite(p.W) ? json(p.W) : json(nullptr)}, {"reason", p.reason}});
  }
  payload["tau_probes"] = probes;
  payload["form"] = minimax::to_string(cfg_.options.search.form);
  extra_inputs_["design_model"] = fingerprints_["design_model"];
  write("controller.json", "controller", payload);
  extra_inputs_["controller"] = fingerprints_["controller"];
  write("verification.json", "verification", io::verification_to_json(r.verification));
  extra_inputs_.erase("controller");
  extra_inputs_.erase("design_model");
}

int Run::synth_stage() {
  if (cfg_.ahfv) {
    const auto d = ahfv::design_demo(*cfg_.demo);
    write_design(d.result, d.envelope.box);
  } else {
    write_design(pipeline::run(cfg_.plant, cfg_.options), cfg_.options.box);
  }
  return 0;
}

int Run::verify_stage() {
  std::string cpath = flags_.controller.empty() ? path("controller.json") : flags_.controller;
  if (!fs::exists(cpath)) {
    log("no controller artifact at " + cpath + ", synthesizing");
    synth_stage();
    cpath = path("controller.json");
  }
  json controller_artifact;
  try {
    controller_artifact = io::read_json(cpath);
  } catch (const SchemaError& e) {
    throw io::FingerprintMismatch(std::string("fingerprint mismatch: controller artifact is unreadable: ") + e.what());
  }
  minimax::Controller c;
  try {
    c = io::controller_from_json(io::open_artifact(controller_artifact, "controller"));
  } catch (const json::exception& e) {
    throw io::FingerprintMismatch(std::string("fingerprint mismatch: controller artifact is malformed: ") + e.what());
  }
  const std::string mpath = (fs::path(cpath).parent_path() / "design_model.json").string();
  const json model_payload = io::open_artifact(io::read_json(mpath), "design_model");
  if (io::fingerprint(model_payload) != c.model_fingerprint) {
    throw io::FingerprintMismatch("fingerprint mismatch: controller was synthesized for design model " +
                                  c.model_fingerprint + ", found " + io::fingerprint(model_payload));
  }
  const auto model = meanval::LinearizedDesignModel(io::design_model_from_json(model_payload));
  const auto report = minimax::verify_design(model, cfg_.options.weights, c, cfg_.options.verify);
  extra_inputs_["design_model"] = io::fingerprint(model_payload);
  extra_inputs_["controller"] = controller_artifact["fingerprint"];
  json payload = io::verification_to_json(report);
  write("verification.json", "verification", payload);
  if (!report.bound_holds || !report.stable) {
    std::cerr << "verification failed: certificate norm " << report.certificate_norm
              << (report.stable ? "" : ", closed loop not Hurwitz") << "\n";
    return 1;
  }
  return 0;
}

json summary_json(const sim::TimeSeries& ts, const minimax::SynthesisWeights& w, double W) {
  const auto iqc = sim::check_iqc(ts);
  const double J = sim::evaluate_cost(ts, w);
  return {{"rows", ts.rows()},
          {"status", ts.status},
          {"aborted", ts.aborted},
          {"J", J},
          {"W", W},
          {"J_le_W", J <= W},
          {"iqc", {{"lhs", iqc.lhs}, {"rhs", iqc.rhs}, {"margin", iqc.margin}, {"holds", iqc.holds}}}};
}

int Run::simulate_stage() {
  if (!cfg_.scenario) throw SchemaError("/scenario", "missing (required by simulate)");
  const auto r = pipeline::run(cfg_.plant, cfg_.options);
  write_design(r, cfg_.options.box);
  sim::validate_scenario(*cfg_.scenario, cfg_.plant.omega);
  sim::PlantTruth truth(cfg_.plant);
  const auto ts = sim::simulate_closed_loop(*cfg_.scenario, truth, r.design);
  const std::string csv = sim::to_csv(ts);
  write_file_atomic(path("timeseries.csv"), csv);
  log("wrote " + path("timeseries.csv"));
  extra_inputs_["controller"] = fingerprints_["controller"];
  json s = summary_json(ts, cfg_.options.weights, r.design.controller.certificate.W);
  s["csv_fingerprint"] = io::fingerprint(std::string_view(csv));
  write("summary.json", "simulation_summary", s);
  return ts.aborted ? 1 : 0;
}

json trim_json(const ahfv::Trim& t) {
  return {{"V", t.V}, {"h", t.h}, {"gamma", t.gamma}, {"alpha", t.alpha}, {"de", t.de},
          {"phi", t.phi}, {"n", t.n}, {"residual", t.residual}};
}

int Run::demo_stage() {
  const auto run = ahfv::run_demo(*cfg_.demo);
  const auto& d = run.design;
  write("trim.json", "trim_report", {{"design", trim_json(d.plant.trim)}, {"truth", trim_json(d.truth_trim)}});
  write_design(d.result, d.envelope.box);
  const std::string csv = sim::to_csv(run.series);
  write_file_atomic(path("timeseries.csv"), csv);
  log("wrote " + path("timeseries.csv"));
  extra_inputs_["controller"] = fingerprints_["controller"];
  const auto& m = run.metrics;
  json s = summary_json(run.series, cfg_.options.weights, m.W);
  s["csv_fingerprint"] = io::fingerprint(std::string_view(csv));
  s["bounded"] = m.bounded;
  s["tracking"] = {{"max_error", m.max_error}, {"tolerance", m.tolerance}, {"passed", m.tracking}};
  s["cost_margin"] = cfg_.demo->cost_margin;
  s["cost_passed"] = m.cost;
  s["passed"] = m.passed();
  write("summary.json", "demo_summary", s);
  if (!flags_.quiet) {
    std::cerr << "tau* " << d.result.design.controller.certificate.tau << "  W " << m.W << "  J " << m.J
              << "  IQC margin " << m.iqc.margin << "  " << (m.passed() ? "PASS" : "FAIL") << "\n";
  }
  return m.passed() ? 0 : 1;
}

int Run::execute() {
  load();
  fs::create_directories(flags_.out);
  const auto start = std::chrono::steady_clock::now();
  int code = 1;
  if (command_ == "linearize") code = linearize_stage();
  else if (command_ == "bound") code = bound_stage();
  else if (command_ == "synth") code = synth_stage();
  else if (command_ == "verify") code = verify_stage();
  else if (command_ == "simulate") code = simulate_stage();
  else if (command_ == "demo-ahfv") code = demo_stage();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  io::write_json(path("run_info.json"),
                 {{"command", command_}, {"timestamp", stamp}, {"elapsed_s", elapsed}, {"exit_code", code},
                  {"threads", omp_get_max_threads()}, {"artifacts", fingerprints_}});
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* t = std::getenv("ROBOLIN_THREADS")) {
    const int n = std::atoi(t);
    if (n > 0) omp_set_num_threads(n);
  }
  CLI::App app{"robolin: robust feedback linearization with minimax LQG"};
  app.require_subcommand(1, 1);
  Flags flags;
  auto add_flags = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "run configuration JSON");
    sub->add_option("--out", flags.out, "output directory")->capture_default_str();
    sub->add_option("--seed", flags.seed, "seed for sampling, verification and noise");
    sub->add_option("--tf", flags.tf, "final simulation time");
    sub->add_option("--dt", flags.dt, "integration step");
    sub->add_option("--tau-min", flags.tau_min, "lower end of the tau search");
    sub->add_option("--tau-max", flags.tau_max, "upper end of the tau search");
    sub->add_option("--samples", flags.samples, "random samples for the rho bound");
    sub->add_flag("--quiet", flags.quiet, "suppress progress output");
  };
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"linearize", "relative degree, transform and integrator-chain model"},
      {"bound", "sampled uncertainty bound rho"},
      {"synth", "tau search and minimax LQG controller"},
      {"verify", "re-verify a controller artifact"},
      {"simulate", "closed-loop simulation of the configured scenario"},
      {"demo-ahfv", "full pipeline and tracking run on the hypersonic vehicle"}};
  std::string chosen;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_flags(sub);
    if (std::string(name) == "verify") sub->add_option("--controller", flags.controller, "controller artifact");
    sub->callback([&chosen, name = std::string(name)] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    return Run(chosen, flags).execute();
  } catch (const minimax::NoFeasibleTau& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 2;
  } catch (const minimax::Infeasible& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 2;
  } catch (const io::FingerprintMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const SchemaError& e) {
    std::cerr << "config error at " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
