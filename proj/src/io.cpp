#include "robolin/io.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>

#include "robolin/fileio.hpp"

namespace robolin::io {

using Eigen::MatrixXd;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fingerprint(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(bytes);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xF];
  return out;
}

std::string fingerprint(const json& j) { return fingerprint(std::string_view(j.dump())); }

namespace {

std::string child(const std::string& ptr, const std::string& key) { return ptr + "/" + key; }
std::string child(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

void require_object(const json& j, const std::string& ptr) {
  if (!j.is_object()) throw SchemaError(ptr, "expected an object");
}

void check_keys(const json& j, const std::string& ptr, std::initializer_list<const char*> allowed) {
  require_object(j, ptr);
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!k.empty() && k[0] == '_') continue;
    if (!ok.count(k)) throw SchemaError(child(ptr, k), "unknown key");
  }
}

const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw SchemaError(ptr, "expected a number");
  return j.get<double>();
}

double number(const json& obj, const std::string& ptr, const char* key, std::optional<double> def = std::nullopt) {
  const json* v = find(obj, key);
  if (!v) {
    if (def) return *def;
    throw SchemaError(child(ptr, key), "missing required number");
  }
  return number(*v, child(ptr, key));
}

std::uint64_t unsigned_int(const json& obj, const std::string& ptr, const char* key, std::uint64_t def) {
  const json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
    throw SchemaError(child(ptr, key), "expected a non-negative integer");
  }
  return v->get<std::uint64_t>();
}

bool boolean(const json& obj, const std::string& ptr, const char* key, bool def) {
  const json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_boolean()) throw SchemaError(child(ptr, key), "expected true or false");
  return v->get<bool>();
}

std::string string(const json& j, const std::string& ptr) {
  if (!j.is_string()) throw SchemaError(ptr, "expected a string");
  return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], child(ptr, i)));
  return out;
}

std::vector<std::string> strings(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(string(j[i], child(ptr, i)));
  return out;
}

std::vector<std::size_t> indices(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array of indices");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer() || j[i].get<long long>() < 0) throw SchemaError(child(ptr, i), "expected a non-negative integer");
    out.push_back(j[i].get<std::size_t>());
  }
  return out;
}

plant::Box box(const json& j, const std::string& ptr) {
  check_keys(j, ptr, {"lower", "upper"});
  const json* lo = find(j, "lower");
  const json* hi = find(j, "upper");
  if (!lo) throw SchemaError(child(ptr, "lower"), "missing");
  if (!hi) throw SchemaError(child(ptr, "upper"), "missing");
  auto l = numbers(*lo, child(ptr, "lower"));
  auto u = numbers(*hi, child(ptr, "upper"));
  if (l.size() != u.size()) throw SchemaError(ptr, "lower and upper differ in length");
  for (std::size_t i = 0; i < l.size(); ++i)
    if (l[i] > u[i]) throw SchemaError(child(child(ptr, "lower"), i), "lower bound exceeds upper bound");
  return plant::Box(std::move(l), std::move(u));
}

json box_to_json(const plant::Box& b) { return {{"lower", b.lower}, {"upper", b.upper}}; }

plant::PlantText plant_text(const json& j, const std::string& ptr) {
  check_keys(j, ptr, {"states", "inputs", "parameters", "f", "g", "outputs", "p0", "omega"});
  auto need = [&](const char* key) -> const json& {
    const json* v = find(j, key);
    if (!v) throw SchemaError(child(ptr, key), "missing");
    return *v;
  };
  plant::PlantText t;
  t.states = strings(need("states"), child(ptr, "states"));
  t.inputs = strings(need("inputs"), child(ptr, "inputs"));
  t.parameters = find(j, "parameters") ? strings(j["parameters"], child(ptr, "parameters")) : std::vector<std::string>{};
  t.f = strings(need("f"), child(ptr, "f"));
  const json& g = need("g");
  if (!g.is_array()) throw SchemaError(child(ptr, "g"), "expected an array of rows");
  for (std::size_t i = 0; i < g.size(); ++i) t.g.push_back(strings(g[i], child(child(ptr, "g"), i)));
  t.outputs = strings(need("outputs"), child(ptr, "outputs"));
  t.p0 = find(j, "p0") ? numbers(j["p0"], child(ptr, "p0")) : std::vector<double>{};
  t.omega = find(j, "omega") ? box(j["omega"], child(ptr, "omega")) : plant::Box({}, {});
  return t;
}

sim::ParameterSignal signal(const json& j, const std::string& ptr) {
  require_object(j, ptr);
  sim::ParameterSignal s;
  const std::string kind = find(j, "kind") ? string(j["kind"], child(ptr, "kind")) : "constant";
  if (kind == "constant") {
    check_keys(j, ptr, {"kind", "value"});
    s.value = number(j, ptr, "value");
  } else if (kind == "sinusoid") {
    check_keys(j, ptr, {"kind", "value", "amplitude", "frequency", "phase"});
    s.kind = sim::ParameterSignal::Kind::kSinusoid;
    s.value = number(j, ptr, "value");
    s.amplitude = number(j, ptr, "amplitude");
    s.frequency = number(j, ptr, "frequency");
    s.phase = number(j, ptr, "phase", 0.0);
  } else if (kind == "piecewise") {
    check_keys(j, ptr, {"kind", "times", "values"});
    s.kind = sim::ParameterSignal::Kind::kPiecewise;
    if (!find(j, "times") || !find(j, "values")) throw SchemaError(ptr, "piecewise signal needs times and values");
    s.times = numbers(j["times"], child(ptr, "times"));
    s.values = numbers(j["values"], child(ptr, "values"));
    if (s.times.empty() || s.times.size() != s.values.size()) throw SchemaError(ptr, "times and values must be non-empty and equally long");
  } else {
    throw SchemaError(child(ptr, "kind"), "unknown signal kind '" + kind + "'");
  }
  return s;
}

sim::ReferenceSchedule schedule(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array of segments");
  sim::ReferenceSchedule r;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = child(ptr, i);
    check_keys(j[i], p, {"kind", "t0", "value", "rate"});
    sim::ReferenceSegment s;
    const std::string kind = find(j[i], "kind") ? string(j[i]["kind"], child(p, "kind")) : "step";
    if (kind == "step") {
      s.kind = sim::ReferenceSegment::Kind::kStep;
      s.value = number(j[i], p, "value");
    } else if (kind == "ramp") {
      s.kind = sim::ReferenceSegment::Kind::kRamp;
      s.value = number(j[i], p, "value");
      s.rate = number(j[i], p, "rate");
    } else if (kind == "hold") {
      s.kind = sim::ReferenceSegment::Kind::kHold;
    } else {
      throw SchemaError(child(p, "kind"), "unknown segment kind '" + kind + "'");
    }
    s.t0 = number(j[i], p, "t0", 0.0);
    r.segments.push_back(s);
  }
  return r;
}

sim::Scenario scenario(const json& j, const std::string& ptr, std::uint64_t seed) {
  check_keys(j, ptr, {"t_final", "dt", "x0", "noise_seed", "noise_intensity", "u_lower", "u_upper", "blowup",
                      "parameters", "references"});
  sim::Scenario s;
  s.t_final = number(j, ptr, "t_final", 1.0);
  s.dt = number(j, ptr, "dt", 0.005);
  if (!find(j, "x0")) throw SchemaError(child(ptr, "x0"), "missing");
  const auto x0 = numbers(j["x0"], child(ptr, "x0"));
  s.x0 = Eigen::Map<const Eigen::VectorXd>(x0.data(), static_cast<Eigen::Index>(x0.size()));
  s.noise_seed = unsigned_int(j, ptr, "noise_seed", seed);
  s.noise_intensity = number(j, ptr, "noise_intensity", 0.0);
  if (find(j, "u_lower")) s.u_lower = numbers(j["u_lower"], child(ptr, "u_lower"));
  if (find(j, "u_upper")) s.u_upper = numbers(j["u_upper"], child(ptr, "u_upper"));
  s.blowup = number(j, ptr, "blowup", 1e6);
  if (find(j, "parameters")) {
    const json& ps = j["parameters"];
    if (!ps.is_array()) throw SchemaError(child(ptr, "parameters"), "expected an array");
    for (std::size_t i = 0; i < ps.size(); ++i) s.parameters.push_back(signal(ps[i], child(child(ptr, "parameters"), i)));
  }
  if (find(j, "references")) {
    const json& rs = j["references"];
    if (!rs.is_array()) throw SchemaError(child(ptr, "references"), "expected an array");
    for (std::size_t i = 0; i < rs.size(); ++i) s.references.push_back(schedule(rs[i], child(child(ptr, "references"), i)));
  }
  return s;
}

void read_design_options(const json& doc, pipeline::Options& o) {
  if (const json* r = find(doc, "region")) o.region = box(*r, "/region");
  o.degree_samples = unsigned_int(doc, "", "degree_samples", o.degree_samples);
  o.integrators = boolean(doc, "", "integrators", o.integrators);
  if (const json* b = find(doc, "box")) {
    check_keys(*b, "/box", {"chi", "v"});
    if (!find(*b, "chi") || !find(*b, "v")) throw SchemaError("/box", "needs chi and v");
    o.box.chi = box((*b)["chi"], "/box/chi");
    o.box.v = box((*b)["v"], "/box/v");
  }
  if (const json* r = find(doc, "rho")) {
    o.rho = number(*r, "/rho");
    if (!(*o.rho >= 0.0)) throw SchemaError("/rho", "must be non-negative");
  }
  if (const json* s = find(doc, "sampling")) {
    const std::string p = "/sampling";
    check_keys(*s, p, {"grid_points", "max_grid_axes", "random", "max_vertex_axes", "budget", "refine_starts",
                       "refine_evals", "safety"});
    auto& pl = o.plan;
    pl.grid_points = unsigned_int(*s, p, "grid_points", pl.grid_points);
    pl.max_grid_axes = unsigned_int(*s, p, "max_grid_axes", pl.max_grid_axes);
    pl.random = unsigned_int(*s, p, "random", pl.random);
    pl.max_vertex_axes = unsigned_int(*s, p, "max_vertex_axes", pl.max_vertex_axes);
    pl.budget = unsigned_int(*s, p, "budget", pl.budget);
    pl.refine_starts = unsigned_int(*s, p, "refine_starts", pl.refine_starts);
    pl.refine_evals = unsigned_int(*s, p, "refine_evals", pl.refine_evals);
    pl.safety = number(*s, p, "safety", pl.safety);
  }
  if (const json* c = find(doc, "conventions")) {
    const std::string p = "/conventions";
    check_keys(*c, p, {"measured", "sensor_scale", "E1"});
    if (find(*c, "measured")) o.conventions.measured = indices((*c)["measured"], p + "/measured");
    if (find(*c, "sensor_scale")) o.conventions.sensor_scale = numbers((*c)["sensor_scale"], p + "/sensor_scale");
    if (find(*c, "E1")) o.conventions.E1 = matrix_from_json((*c)["E1"], p + "/E1");
  }
  if (const json* w = find(doc, "weights")) {
    check_keys(*w, "/weights", {"R", "G"});
    if (!find(*w, "R") || !find(*w, "G")) throw SchemaError("/weights", "needs R and G");
    o.weights.R = matrix_from_json((*w)["R"], "/weights/R");
    o.weights.G = matrix_from_json((*w)["G"], "/weights/G");
  }
  if (const json* t = find(doc, "tau")) {
    const std::string p = "/tau";
    check_keys(*t, p, {"min", "max", "grid", "golden_iters", "form"});
    o.search.tau_min = number(*t, p, "min", o.search.tau_min);
    o.search.tau_max = number(*t, p, "max", o.search.tau_max);
    o.search.grid = unsigned_int(*t, p, "grid", o.search.grid);
    o.search.golden_iters = unsigned_int(*t, p, "golden_iters", o.search.golden_iters);
    if (find(*t, "form")) {
      try {
        o.search.form = minimax::parse_wtau_form(string((*t)["form"], p + "/form"));
      } catch (const SchemaError&) {
        throw;
      } catch (const Error& e) {
        throw SchemaError(p + "/form", e.what());
      }
    }
  }
  if (const json* v = find(doc, "verify")) {
    check_keys(*v, "/verify", {"delta_samples"});
    o.verify.delta_samples = unsigned_int(*v, "/verify", "delta_samples", o.verify.delta_samples);
  }
}

std::string resolve(const std::string& base, const std::string& rel) {
  std::filesystem::path p(rel);
  if (p.is_relative()) p = std::filesystem::path(base) / p;
  return p.lexically_normal().string();
}

ahfv::DemoConfig demo_config(const json& doc, const std::string& base, std::string& coeff_fp) {
  const json empty = json::object();
  const json* a = find(doc, "ahfv");
  const json& j = a ? *a : empty;
  const std::string ptr = "/ahfv";
  check_keys(j, ptr, {"coefficients", "output_units", "command", "t_command", "t_final", "dt", "variation", "frequency",
                      "phase", "noise_seed", "noise_intensity", "de_limits", "phic_limits", "pilot", "settle_fraction",
                      "tracking_tolerance", "cost_margin", "validate_samples"});
  const std::string coeff_path =
      resolve(base, find(j, "coefficients") ? string(j["coefficients"], ptr + "/coefficients") : "ahfv_coeffs.json");
  if (!std::filesystem::exists(coeff_path)) throw SchemaError(ptr + "/coefficients", "file not found: " + coeff_path);
  const json coeffs = read_json(coeff_path);
  coeff_fp = fingerprint(coeffs);
  ahfv::DemoConfig d = ahfv::default_demo_config(ahfv::coefficients_from_json(coeffs));
  auto pair = [&](const char* key, std::array<double, 2>& out) {
    if (const json* v = find(j, key)) {
      const auto n = numbers(*v, child(ptr, key));
      if (n.size() != 2) throw SchemaError(child(ptr, key), "expected two numbers");
      out = {n[0], n[1]};
    }
  };
  pair("output_units", d.output_units);
  pair("command", d.command);
  pair("de_limits", d.de_limits);
  pair("phic_limits", d.phic_limits);
  d.t_command = number(j, ptr, "t_command", d.t_command);
  d.t_final = number(j, ptr, "t_final", d.t_final);
  d.dt = number(j, ptr, "dt", d.dt);
  d.variation = number(j, ptr, "variation", d.variation);
  if (find(j, "frequency")) d.frequency = numbers(j["frequency"], ptr + "/frequency");
  if (find(j, "phase")) d.phase = numbers(j["phase"], ptr + "/phase");
  d.noise_seed = unsigned_int(j, ptr, "noise_seed", d.noise_seed);
  d.noise_intensity = number(j, ptr, "noise_intensity", d.noise_intensity);
  d.settle_fraction = number(j, ptr, "settle_fraction", d.settle_fraction);
  d.tracking_tolerance = number(j, ptr, "tracking_tolerance", d.tracking_tolerance);
  d.cost_margin = number(j, ptr, "cost_margin", d.cost_margin);
  d.validate_samples = unsigned_int(j, ptr, "validate_samples", d.validate_samples);
  if (const json* p = find(j, "pilot")) {
    const std::string pp = ptr + "/pilot";
    check_keys(*p, pp, {"weight", "horizon", "dt", "inflation", "chi_floor", "v_floor"});
    d.pilot_weight = number(*p, pp, "weight", d.pilot_weight);
    d.pilot_horizon = number(*p, pp, "horizon", d.pilot_horizon);
    d.pilot_dt = number(*p, pp, "dt", d.pilot_dt);
    d.inflation = number(*p, pp, "inflation", d.inflation);
    d.chi_floor = number(*p, pp, "chi_floor", d.chi_floor);
    d.v_floor = number(*p, pp, "v_floor", d.v_floor);
  }
  if (d.frequency.size() != ahfv::kParamCount) throw SchemaError(ptr + "/frequency", "expected 9 numbers");
  if (d.phase.size() != ahfv::kParamCount) throw SchemaError(ptr + "/phase", "expected 9 numbers");
  return d;
}

}  // namespace

json matrix_to_json(const MatrixXd& M) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(M.size()));
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index k = 0; k < M.cols(); ++k) data.push_back(M(i, k));
  return {{"rows", M.rows()}, {"cols", M.cols()}, {"data", data}};
}

MatrixXd matrix_from_json(const json& j, const std::string& ptr) {
  if (j.is_array()) {
    const auto d = numbers(j, ptr);
    MatrixXd M = MatrixXd::Zero(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = d[i];
    return M;
  }
  check_keys(j, ptr, {"rows", "cols", "data"});
  const auto r = unsigned_int(j, ptr, "rows", 0), c = unsigned_int(j, ptr, "cols", 0);
  if (!find(j, "data")) throw SchemaError(child(ptr, "data"), "missing");
  const auto d = numbers(j["data"], child(ptr, "data"));
  if (d.size() != r * c) throw SchemaError(child(ptr, "data"), "expected rows * cols entries");
  MatrixXd M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t k = 0; k < c; ++k) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = d[i * c + k];
  return M;
}

RunConfig parse_config(const json& doc, const std::string& base_dir) {
  check_keys(doc, "", {"schema_version", "seed", "plant", "ahfv", "region", "degree_samples", "integrators", "box",
                       "rho", "sampling", "conventions", "weights", "tau", "verify", "scenario"});
  const json* v = find(doc, "schema_version");
  if (!v) throw SchemaError("/schema_version", "missing");
  if (!v->is_number_integer() || v->get<int>() != kSchemaVersion) {
    throw SchemaError("/schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
  }
  RunConfig cfg;
  cfg.fingerprint = fingerprint(doc);
  const std::uint64_t seed = unsigned_int(doc, "", "seed", 1);
  const json* p = find(doc, "plant");
  if (!p) throw SchemaError("/plant", "missing");
  if (p->is_string()) {
    if (p->get<std::string>() != "ahfv") throw SchemaError("/plant", "unknown builtin plant '" + p->get<std::string>() + "'");
    cfg.ahfv = true;
    cfg.demo = demo_config(doc, base_dir, cfg.coefficients_fingerprint);
    cfg.options = cfg.demo->design;
  } else {
    if (find(doc, "ahfv")) throw SchemaError("/ahfv", "only valid with the builtin ahfv plant");
    try {
      cfg.plant = plant::parse_plant(plant_text(*p, "/plant"));
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      throw SchemaError("/plant", e.what());
    }
    cfg.options.region = plant::Box(std::vector<double>(cfg.plant.n(), -1.0), std::vector<double>(cfg.plant.n(), 1.0));
    cfg.options.weights.R = MatrixXd::Identity(1, 1);
  }
  read_design_options(doc, cfg.options);
  cfg.options.seed = seed;
  cfg.options.plan.seed = seed;
  cfg.options.verify.seed = seed;
  if (!cfg.ahfv) {
    if (!find(doc, "weights")) throw SchemaError("/weights", "missing");
    if (!find(doc, "conventions")) throw SchemaError("/conventions", "missing");
    if (!cfg.options.rho && !find(doc, "box")) throw SchemaError("/box", "required unless rho is given");
    if (find(doc, "scenario")) cfg.scenario = scenario(doc["scenario"], "/scenario", seed);
  } else {
    if (find(doc, "scenario")) throw SchemaError("/scenario", "the AHFV scenario is set under /ahfv");
    cfg.demo->design = cfg.options;
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error("config file not found: " + path);
  RunConfig cfg = parse_config(read_json(path), std::filesystem::path(path).parent_path().string());
  cfg.path = path;
  return cfg;
}

json design_model_to_json(const meanval::LinearizedDesignModel& m) {
  json j;
  j["A"] = matrix_to_json(m.A);
  j["B1"] = matrix_to_json(m.B1);
  j["B2"] = matrix_to_json(m.B2);
  j["C1"] = matrix_to_json(m.C1);
  j["C2"] = matrix_to_json(m.C2);
  j["D1"] = matrix_to_json(m.D1);
  j["D2"] = matrix_to_json(m.D2);
  j["C1bar"] = matrix_to_json(m.C1bar);
  j["D1bar"] = matrix_to_json(m.D1bar);
  j["E1"] = matrix_to_json(m.E1);
  j["rho"] = m.rho;
  j["blocks"] = m.blocks;
  j["measured"] = m.measured;
  j["sensor_scale"] = m.sensor_scale;
  j["warnings"] = m.warnings;
  return j;
}

meanval::LinearizedDesignModel design_model_from_json(const json& j) {
  check_keys(j, "/payload", {"A", "B1", "B2", "C1", "C2", "D1", "D2", "C1bar", "D1bar", "E1", "rho", "blocks",
                             "measured", "sensor_scale", "warnings"});
  meanval::LinearizedDesignModel m;
  auto mat = [&](const char* k) {
    if (!find(j, k)) throw SchemaError(std::string("/payload/") + k, "missing");
    return matrix_from_json(j[k], std::string("/payload/") + k);
  };
  m.A = mat("A");
  m.B1 = mat("B1");
  m.B2 = mat("B2");
  m.C1 = mat("C1");
  m.C2 = mat("C2");
  m.D1 = mat("D1");
  m.D2 = mat("D2");
  m.C1bar = mat("C1bar");
  m.D1bar = mat("D1bar");
  m.E1 = mat("E1");
  m.rho = number(j, "/payload", "rho");
  m.blocks = j.value("blocks", std::vector<int>{});
  m.measured = indices(j.value("measured", json::array()), "/payload/measured");
  m.sensor_scale = numbers(j.value("sensor_scale", json::array()), "/payload/sensor_scale");
  m.warnings = strings(j.value("warnings", json::array()), "/payload/warnings");
  return m;
}

json certificate_to_json(const minimax::TauCertificate& c) {
  json j;
  j["tau"] = c.tau;
  j["W"] = std::isfinite(c.W) ? json(c.W) : json(nullptr);
  j["Y"] = matrix_to_json(c.Y);
  j["X"] = matrix_to_json(c.X);
  j["flags"] = {{"Y_pd", c.Y_pd}, {"X_pd", c.X_pd}, {"coupling_pd", c.coupling_pd}, {"weight_psd", c.weight_psd}};
  j["residual_y"] = c.residual_y;
  j["residual_x"] = c.residual_x;
  j["reason"] = c.reason;
  return j;
}

json controller_to_json(const minimax::Controller& c) {
  json j;
  j["Ac"] = matrix_to_json(c.Ac);
  j["Bc"] = matrix_to_json(c.Bc);
  j["K"] = matrix_to_json(c.K);
  j["certificate"] = certificate_to_json(c.certificate);
  j["model_fingerprint"] = c.model_fingerprint;
  return j;
}

minimax::Controller controller_from_json(const json& j) {
  check_keys(j, "/payload", {"Ac", "Bc", "K", "certificate", "model_fingerprint", "tau_probes", "form"});
  minimax::Controller c;
  for (const char* k : {"Ac", "Bc", "K", "certificate", "model_fingerprint"})
    if (!find(j, k)) throw SchemaError(std::string("/payload/") + k, "missing");
  c.Ac = matrix_from_json(j["Ac"], "/payload/Ac");
  c.Bc = matrix_from_json(j["Bc"], "/payload/Bc");
  c.K = matrix_from_json(j["K"], "/payload/K");
  const json& cert = j["certificate"];
  c.certificate.tau = number(cert, "/payload/certificate", "tau");
  c.certificate.W = cert.at("W").is_null() ? std::numeric_limits<double>::infinity() : number(cert["W"], "/payload/certificate/W");
  c.certificate.Y = matrix_from_json(cert.at("Y"), "/payload/certificate/Y");
  c.certificate.X = matrix_from_json(cert.at("X"), "/payload/certificate/X");
  const json& f = cert.at("flags");
  c.certificate.Y_pd = f.at("Y_pd").get<bool>();
  c.certificate.X_pd = f.at("X_pd").get<bool>();
  c.certificate.coupling_pd = f.at("coupling_pd").get<bool>();
  c.certificate.weight_psd = f.at("weight_psd").get<bool>();
  c.certificate.residual_y = number(cert, "/payload/certificate", "residual_y", 0.0);
  c.certificate.residual_x = number(cert, "/payload/certificate", "residual_x", 0.0);
  c.model_fingerprint = string(j["model_fingerprint"], "/payload/model_fingerprint");
  return c;
}

json bound_to_json(const meanval::UncertaintyBound& b, const meanval::HyperBox& hb) {
  json j;
  j["rho"] = b.rho;
  j["sampled_max"] = b.sampled_max;
  j["argmax"] = std::vector<double>(b.argmax.data(), b.argmax.data() + b.argmax.size());
  j["samples"] = b.samples;
  j["failed"] = b.failed;
  j["seed"] = b.seed;
  j["box"] = {{"chi", box_to_json(hb.chi)}, {"v", box_to_json(hb.v)}};
  return j;
}

json verification_to_json(const minimax::VerificationReport& r) {
  json j;
  j["certificate_norm"] = r.certificate_norm;
  j["psi_norm"] = r.psi_norm;
  j["bound_holds"] = r.bound_holds;
  j["abscissa"] = r.abscissa;
  j["stable"] = r.stable;
  j["delta_samples"] = r.delta_samples;
  j["worst_perturbed_abscissa"] = r.worst_perturbed_abscissa;
  j["robustly_stable"] = r.robustly_stable;
  return j;
}

json linearization_to_json(const pipeline::Linearization& l) {
  json j;
  j["relative_degree"] = l.degrees.profile.r;
  j["singular_points"] = l.degrees.singular_points.size();
  j["A"] = matrix_to_json(l.brunovsky.A);
  j["B"] = matrix_to_json(l.brunovsky.B);
  j["blocks"] = l.brunovsky.blocks;
  json t;
  t["integrators"] = l.transform.integrators();
  t["core_positions"] = l.transform.core_positions();
  std::vector<std::string> core, nominal;
  for (const auto& e : l.transform.core_exprs(false)) core.push_back(expr::to_string(e));
  for (const auto& e : l.transform.core_exprs(true)) nominal.push_back(expr::to_string(e));
  t["core"] = core;
  t["core_nominal"] = nominal;
  j["transform"] = t;
  std::vector<std::string> fs;
  for (const auto& e : l.degrees.chain.f_star) fs.push_back(expr::to_string(e));
  std::vector<std::vector<std::string>> gs;
  for (const auto& row : l.degrees.chain.g_star) {
    gs.emplace_back();
    for (const auto& e : row) gs.back().push_back(expr::to_string(e));
  }
  j["f_star"] = fs;
  j["g_star"] = gs;
  j["variables"] = l.plant.plant.space.names();
  return j;
}

json make_artifact(const std::string& kind, const json& inputs, const json& payload) {
  return {{"schema_version", kSchemaVersion}, {"kind", kind}, {"inputs", inputs}, {"payload", payload},
          {"fingerprint", fingerprint(payload)}};
}

json open_artifact(const json& a, const std::string& kind) {
  check_keys(a, "", {"schema_version", "kind", "inputs", "payload", "fingerprint"});
  if (!find(a, "schema_version") || a["schema_version"] != kSchemaVersion) {
    throw SchemaError("/schema_version", "unsupported artifact version");
  }
  if (!find(a, "kind") || a["kind"] != kind) throw SchemaError("/kind", "expected a '" + kind + "' artifact");
  if (!find(a, "payload")) throw SchemaError("/payload", "missing");
  const std::string stored = find(a, "fingerprint") ? string(a["fingerprint"], "/fingerprint") : "";
  const std::string actual = fingerprint(a["payload"]);
  if (stored != actual) {
    throw FingerprintMismatch("fingerprint mismatch in " + kind + " artifact: stored " + stored + ", payload hashes to " + actual);
  }
  return a["payload"];
}

void write_json(const std::string& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("", path + ": " + e.what());
  }
}

}  // namespace robolin::io
